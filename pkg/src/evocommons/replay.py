"""Deterministic replay of recorded episodes.

The replay log stores, per episode, the seed and every player's action at
every step; that is sufficient to re-simulate the episode bit-exactly under
the run's resolved config. Replay always verifies the recomputed returns
against the recorded ones and can optionally emit text or PNG frames.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import IntegrityError
from .gridworld import render_ascii, render_rgb, reset, step
from .harness import RunPaths


def load_run_config(run_dir: str) -> ExperimentConfig:
    return load_config(RunPaths(run_dir).config_txt)


def _find_record(run_dir: str, episode: int) -> dict:
    path = RunPaths(run_dir).replay_jsonl
    try:
        with open(path) as fh:
            for line in fh:
                record = json.loads(line)
                if record["episode"] == episode:
                    return record
    except OSError as exc:
        raise IntegrityError(f"cannot read replay log: {exc}") from None
    raise IntegrityError(f"episode {episode} not found in replay log")


def replay_episode(run_dir: str, episode: int, render: str | None = None,
                   frames_dir: str | None = None) -> dict:
    """Re-simulate one recorded episode and verify its returns bit-exactly.

    render may be None (validate only), "text" (one ascii frame per step to
    a single file), or "png" (one image per step). Returns a summary dict.
    Raises IntegrityError on any mismatch or a truncated record.
    """
    config = load_run_config(run_dir)
    record = _find_record(run_dir, episode)
    env_cfg = config.env
    actions = np.asarray(record["actions"], dtype=np.int64)
    if actions.shape != (env_cfg.episode_length, env_cfg.num_players):
        raise IntegrityError(
            f"replay record for episode {episode} is truncated or malformed: "
            f"actions shape {actions.shape}")

    frames = []
    state = reset(env_cfg, int(record["seed"]))
    returns = np.zeros(env_cfg.num_players)
    if render:
        frames.append(_frame(state, render))
    for t in range(env_cfg.episode_length):
        outcome = step(state, actions[t])
        returns += outcome.rewards
        if render:
            frames.append(_frame(state, render))

    recorded = np.asarray(record["returns"], dtype=np.float64)
    if not np.array_equal(returns, recorded):
        raise IntegrityError(
            f"episode {episode} replay mismatch: recomputed {returns.tolist()} "
            f"vs recorded {recorded.tolist()}")

    written = None
    if render:
        written = _write_frames(frames, render, frames_dir or
                                os.path.join(run_dir, f"replay_ep{episode:06d}"))
    return {"episode": episode, "returns": returns.tolist(), "frames": written,
            "steps": int(env_cfg.episode_length)}


def validate_run(run_dir: str) -> int:
    """Replay-verify every recorded episode; returns the count checked."""
    path = RunPaths(run_dir).replay_jsonl
    count = 0
    with open(path) as fh:
        for line in fh:
            replay_episode(run_dir, json.loads(line)["episode"])
            count += 1
    return count


def _frame(state, render: str):
    if render == "text":
        return render_ascii(state)
    if render == "png":
        return render_rgb(state, scale=8)
    raise IntegrityError(f"unknown render mode {render!r}")


def _write_frames(frames, render: str, out: str):
    if render == "text":
        path = out + ".txt"
        with open(path, "w") as fh:
            for t, frame in enumerate(frames):
                fh.write(f"== step {t}\n{frame}\n")
        return path
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.image as mpimg
    os.makedirs(out, exist_ok=True)
    for t, frame in enumerate(frames):
        mpimg.imsave(os.path.join(out, f"step_{t:05d}.png"), frame)
    return out
