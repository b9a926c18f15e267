"""Experiment orchestration.

Runs the training loop: sample a group (random or assortative), play one
episode computing intrinsic rewards every step, apply one learner update per
player per unroll segment, fold returns into fitness, and periodically run
the evolution pass. Emits an episode CSV, a loss CSV, a JSONL replay log
sufficient for bit-exact re-simulation, and self-describing checkpoints that
support exact resume.

Arenas are interleaved deterministic streams in one process: episode i runs
on arena i mod arenas, and evolution is always serialized between episodes,
so every run is reproducible from its config seed alone (wall-clock timings
go to a separate file that is excluded from the determinism contract).
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import learner as ln
from .config import ExperimentConfig, config_to_text, parse_config_text
from .errors import ConfigError, IntegrityError, NumericError
from .evolution import (
    GroupAssignment,
    PolicyIndividual,
    RewardIndividual,
    RewardMode,
    assign_fitness,
    exploit_explore,
    sample_players,
)
from .gridworld import GameKind, TagFired, observe_all, reset, step
from .matchmaking import CoopRecord, Matchmaking, assortative_groups, coop_score_cleanup, coop_score_harvest
from .metrics import METRIC_COLUMNS, EpisodeStats, metrics_row
from .rng import episode_seed, generator_state, restore_generator, stream
from .social_reward import (
    DecayState,
    FeatureMode,
    RewardNetParams,
    intrinsic_reward,
    intrinsic_rewards_group,
    reorder_indices,
    update_decay,
)

CHECKPOINT_FORMAT_VERSION = 1
REPLAY_FORMAT_VERSION = 1
EPISODES_SCHEMA = "# evocommons-episodes-v1"
LOSSES_SCHEMA = "# evocommons-losses-v1"
TIMINGS_SCHEMA = "# evocommons-timings-v1"

# spawn-key roles under the master seed
_ROLE_INIT = 1000
_ROLE_SAMPLER = 1001
_ROLE_EVO = 1002
# spawn-key roles under an episode seed
_ROLE_ENV = 0
_ROLE_PLAYER = 1


def _fmt(value) -> str:
    if isinstance(value, float) or isinstance(value, np.floating):
        return repr(float(value))
    return str(value)


@dataclass
class RunPaths:
    run_dir: str

    @property
    def config_txt(self):
        return os.path.join(self.run_dir, "config.txt")

    @property
    def episodes_csv(self):
        return os.path.join(self.run_dir, "episodes.csv")

    @property
    def losses_csv(self):
        return os.path.join(self.run_dir, "losses.csv")

    @property
    def timings_log(self):
        return os.path.join(self.run_dir, "timings.log")

    @property
    def replay_jsonl(self):
        return os.path.join(self.run_dir, "replay.jsonl")

    @property
    def checkpoints_dir(self):
        return os.path.join(self.run_dir, "checkpoints")


@dataclass
class ExperimentState:
    """Everything a checkpoint must capture for exact resume."""

    config: ExperimentConfig
    policy_pop: list
    reward_pop: list
    coop_scores: dict          # individual id -> CoopRecord
    pending_groups: list       # queued assortative groups
    episode_index: int
    sampler_rng: np.random.Generator
    evo_rng: np.random.Generator


@dataclass
class EpisodeResult:
    returns: np.ndarray
    intrinsic_returns: np.ndarray
    stats: EpisodeStats
    actions_log: np.ndarray    # (T, players) int
    loss_rows: list
    flagged: bool = False


def init_state(config: ExperimentConfig) -> ExperimentState:
    config.validate()
    env = config.env
    in_dim = ln.encoding_dim(env.obs_window, env.action_count)
    init_rng = stream(config.seed, _ROLE_INIT)
    policy_pop = []
    for i in range(config.evo.population_size):
        params = ln.PolicyParams.init(in_dim, config.learner.encoder_hidden,
                                      env.action_count, init_rng)
        hyper = ln.Hyperparams(
            learning_rate=config.learner.learning_rate_init,
            entropy_cost=ln.sample_entropy_cost(
                init_rng, config.learner.entropy_cost_low, config.learner.entropy_cost_high),
            baseline_cost=config.learner.baseline_cost,
            discount=config.learner.discount,
        )
        policy_pop.append(PolicyIndividual(
            id=i, params=params, hyper=hyper, opt=ln.OptState.for_params(params)))
    reward_pop = [
        RewardIndividual(id=i, theta=RewardNetParams.random_init(env.num_players, init_rng))
        for i in range(config.evo.population_size)
    ]
    return ExperimentState(
        config=config,
        policy_pop=policy_pop,
        reward_pop=reward_pop,
        coop_scores={},
        pending_groups=[],
        episode_index=0,
        sampler_rng=stream(config.seed, _ROLE_SAMPLER),
        evo_rng=stream(config.seed, _ROLE_EVO),
    )


def _next_assignment(state: ExperimentState) -> GroupAssignment:
    config = state.config
    group_size = config.env.num_players
    if config.matchmaking is Matchmaking.RANDOM:
        return sample_players(state.policy_pop, state.reward_pop, config.evo,
                              group_size, state.sampler_rng)
    if not state.pending_groups:
        ids = [ind.id for ind in state.policy_pop]
        perm = [ids[i] for i in state.sampler_rng.permutation(len(ids))]
        usable = (len(perm) // group_size) * group_size
        if usable == 0:
            raise ConfigError("population smaller than the player group")
        known = sorted(r.coop_score for r in state.coop_scores.values())
        cold = float(np.median(known)) if known else 0.0
        records = []
        for pid in perm[:usable]:
            rec = state.coop_scores.get(pid)
            records.append(rec if rec is not None else
                           CoopRecord(individual_id=pid, coop_score=cold, source_episode=-1))
        state.pending_groups = assortative_groups(records, group_size, state.sampler_rng)
    group = state.pending_groups.pop(0)
    if config.evo.reward_mode is RewardMode.INDIVIDUAL:
        reward_ids = group
    else:  # NONE (shared is rejected at validation)
        reward_ids = ()
    return GroupAssignment(policy_ids=group, reward_ids=reward_ids,
                           mode=config.evo.reward_mode)


def play_episode(config: ExperimentConfig, policy_inds: list, thetas: list,
                 ep_seed: int) -> EpisodeResult:
    """One full episode with per-step intrinsic rewards and per-segment
    learner updates. thetas is one RewardNetParams (or None) per player slot.
    """
    env_cfg = config.env
    n = env_cfg.num_players
    mode = config.feature_mode
    unroll = config.learner.unroll_length
    env_state = reset(env_cfg, ep_seed)
    player_rngs = [stream(ep_seed, _ROLE_PLAYER, slot) for slot in range(n)]

    decay = DecayState(e=np.zeros(n), eta=config.feature_decay)
    reorder_idx = reorder_indices(n)
    # one genotype shared by every slot takes the batched path
    shared_theta = thetas[0] if (thetas[0] is not None
                                 and all(t is thetas[0] for t in thetas)) else None
    encodings = [
        ln.encode_observation(obs.window, None, 0.0, 0.0, env_cfg.action_count)
        for obs in observe_all(env_state)
    ]
    returns = np.zeros(n)
    intrinsic_returns = np.zeros(n)
    tag_fires = np.zeros(n)
    positive_steps = [[] for _ in range(n)]
    actions_log = np.zeros((env_cfg.episode_length, n), dtype=np.int64)
    buffers = [_SegmentBuffer() for _ in range(n)]
    loss_rows = []

    for t in range(env_cfg.episode_length):
        acts = np.zeros(n, dtype=np.int64)
        step_logp = np.zeros(n)
        step_ve = np.zeros(n)
        step_vi = np.zeros(n)
        for slot in range(n):
            a, logp, ve, vi = ln.act(policy_inds[slot].params, encodings[slot],
                                     player_rngs[slot])
            acts[slot] = a
            step_logp[slot] = logp
            step_ve[slot] = ve
            step_vi[slot] = vi
        outcome = step(env_state, acts)
        actions_log[t] = acts

        if mode is FeatureMode.RETROSPECTIVE:
            decay = update_decay(decay, outcome.rewards)
            raw_features = decay.e
        else:
            raw_features = step_ve
        if shared_theta is not None:
            intrinsics = intrinsic_rewards_group(shared_theta, raw_features, reorder_idx)
        else:
            intrinsics = np.zeros(n)
            for slot in range(n):
                if thetas[slot] is not None:
                    intrinsics[slot] = intrinsic_reward(
                        thetas[slot], raw_features[reorder_idx[slot]])

        returns += outcome.rewards
        intrinsic_returns += intrinsics
        for event in outcome.events:
            if isinstance(event, TagFired):
                tag_fires[event.player] += 1
        for slot in range(n):
            if outcome.rewards[slot] > 0:
                positive_steps[slot].append(t)
            buffers[slot].append(encodings[slot], acts[slot], step_logp[slot],
                                 outcome.rewards[slot], intrinsics[slot],
                                 step_ve[slot], step_vi[slot])

        next_encodings = [
            ln.encode_observation(outcome.observations[slot].window, int(acts[slot]),
                                  float(intrinsics[slot]), float(outcome.rewards[slot]),
                                  env_cfg.action_count)
            for slot in range(n)
        ]
        at_boundary = ((t + 1) % unroll == 0) or (t == env_cfg.episode_length - 1)
        if at_boundary:
            terminal = t == env_cfg.episode_length - 1
            for slot in range(n):
                ind = policy_inds[slot]
                if terminal:
                    boot_e, boot_i = 0.0, 0.0
                else:
                    boot_e, boot_i = ln.state_values(ind.params, next_encodings[slot])
                segment = buffers[slot].to_segment(boot_e, boot_i)
                report = ln.update(ind.params, ind.opt, segment, ind.hyper)
                loss_rows.append({
                    "player_slot": slot,
                    "policy_id": ind.id,
                    "segment_end": t + 1,
                    **report,
                })
                buffers[slot] = _SegmentBuffer()
        encodings = next_encodings

    stats = EpisodeStats(
        returns=returns,
        tag_fires=tag_fires,
        positive_reward_steps=[np.asarray(s) for s in positive_steps],
        episode_length=env_cfg.episode_length,
    )
    return EpisodeResult(returns=returns, intrinsic_returns=intrinsic_returns,
                         stats=stats, actions_log=actions_log, loss_rows=loss_rows)


class _SegmentBuffer:
    def __init__(self):
        self.inputs = []
        self.actions = []
        self.logprobs = []
        self.rewards_e = []
        self.rewards_i = []
        self.values_e = []
        self.values_i = []

    def append(self, x, a, logp, re_, ri, ve, vi):
        self.inputs.append(x)
        self.actions.append(int(a))
        self.logprobs.append(float(logp))
        self.rewards_e.append(float(re_))
        self.rewards_i.append(float(ri))
        self.values_e.append(float(ve))
        self.values_i.append(float(vi))

    def to_segment(self, boot_e: float, boot_i: float) -> ln.Segment:
        return ln.Segment(
            inputs=np.asarray(self.inputs),
            actions=np.asarray(self.actions, dtype=np.int64),
            logprobs=np.asarray(self.logprobs),
            rewards_e=np.asarray(self.rewards_e),
            rewards_i=np.asarray(self.rewards_i),
            values_e=np.asarray(self.values_e),
            values_i=np.asarray(self.values_i),
            bootstrap_e=boot_e,
            bootstrap_i=boot_i,
        )


def _update_coop_scores(state: ExperimentState, assignment: GroupAssignment,
                        result: EpisodeResult) -> None:
    config = state.config
    for slot, pid in enumerate(assignment.policy_ids):
        if config.env.game is GameKind.CLEANUP:
            score = coop_score_cleanup(result.actions_log[:, slot])
        else:
            score = coop_score_harvest(float(result.returns[slot]), result.returns)
        state.coop_scores[pid] = CoopRecord(
            individual_id=pid, coop_score=score, source_episode=state.episode_index)


# --- persistence ----------------------------------------------------------

def _episode_header(config: ExperimentConfig) -> list:
    n = config.env.num_players
    cols = ["episode", "arena", "seed", "policy_ids", "reward_ids", "flagged"]
    cols += [f"return_{i}" for i in range(n)]
    cols += [f"intrinsic_{i}" for i in range(n)]
    cols += list(METRIC_COLUMNS)
    return cols

_LOSS_COLUMNS = ["episode", "player_slot", "policy_id", "segment_end", "loss",
                 "policy_loss", "value_loss_e", "value_loss_i", "entropy",
                 "grad_norm", "skipped"]


class _RunWriter:
    """Owns the run directory's append-only output files."""

    def __init__(self, paths: RunPaths, config: ExperimentConfig, fresh: bool):
        self.paths = paths
        self.config = config
        os.makedirs(paths.checkpoints_dir, exist_ok=True)
        if fresh:
            with open(paths.config_txt, "w") as fh:
                fh.write(config_to_text(config))
            with open(paths.episodes_csv, "w", newline="") as fh:
                fh.write(EPISODES_SCHEMA + "\n")
                csv.writer(fh).writerow(_episode_header(config))
            with open(paths.losses_csv, "w", newline="") as fh:
                fh.write(LOSSES_SCHEMA + "\n")
                csv.writer(fh).writerow(_LOSS_COLUMNS)
            with open(paths.timings_log, "w", newline="") as fh:
                fh.write(TIMINGS_SCHEMA + "\n")
                csv.writer(fh).writerow(["episode", "wall_time_s"])
            with open(paths.replay_jsonl, "w"):
                pass

    def write_episode(self, episode: int, arena: int, seed: int,
                      assignment: GroupAssignment, result: EpisodeResult,
                      wall_time: float) -> None:
        n = self.config.env.num_players
        row = [str(episode), str(arena), str(seed),
               ";".join(str(i) for i in assignment.policy_ids),
               ";".join(str(i) for i in assignment.reward_ids),
               "1" if result.flagged else "0"]
        row += [_fmt(result.returns[i]) for i in range(n)]
        row += [_fmt(result.intrinsic_returns[i]) for i in range(n)]
        if result.flagged:
            row += ["nan"] * len(METRIC_COLUMNS)
        else:
            metrics = metrics_row(result.stats)
            row += [_fmt(metrics[c]) for c in METRIC_COLUMNS]
        with open(self.paths.episodes_csv, "a", newline="") as fh:
            csv.writer(fh).writerow(row)
        with open(self.paths.losses_csv, "a", newline="") as fh:
            writer = csv.writer(fh)
            for loss in result.loss_rows:
                writer.writerow([
                    str(episode), str(loss["player_slot"]), str(loss["policy_id"]),
                    str(loss["segment_end"]), _fmt(loss["loss"]), _fmt(loss["policy_loss"]),
                    _fmt(loss["value_loss_e"]), _fmt(loss["value_loss_i"]),
                    _fmt(loss["entropy"]), _fmt(loss["grad_norm"]),
                    "1" if loss["skipped"] else "0",
                ])
        with open(self.paths.timings_log, "a", newline="") as fh:
            csv.writer(fh).writerow([str(episode), _fmt(wall_time)])
        if not result.flagged:
            line = {
                "version": REPLAY_FORMAT_VERSION,
                "episode": episode,
                "arena": arena,
                "seed": seed,
                "policy_ids": list(assignment.policy_ids),
                "reward_ids": list(assignment.reward_ids),
                "actions": result.actions_log.tolist(),
                "returns": [float(r) for r in result.returns],
            }
            with open(self.paths.replay_jsonl, "a") as fh:
                fh.write(json.dumps(line, sort_keys=True) + "\n")


def _array_blob(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _blob_array(blob: dict) -> np.ndarray:
    return np.asarray(blob["data"], dtype=np.float64).reshape(blob["shape"])


def save_checkpoint(state: ExperimentState, path: str) -> None:
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "episode": state.episode_index,
        "config_text": config_to_text(state.config),
        "policy_population": [
            {
                "id": ind.id,
                "params": {k: _array_blob(v) for k, v in ind.params.arrays().items()},
                "opt_acc": {k: _array_blob(v) for k, v in ind.opt.acc.items()},
                "hyper": {
                    "learning_rate": ind.hyper.learning_rate,
                    "entropy_cost": ind.hyper.entropy_cost,
                    "baseline_cost": ind.hyper.baseline_cost,
                    "discount": ind.hyper.discount,
                },
                "fitness": ind.fitness,
                "episodes_played": ind.episodes_played,
                "steps_played": ind.steps_played,
            }
            for ind in state.policy_pop
        ],
        "reward_population": [
            {
                "id": ind.id,
                "header": {"num_players": ind.theta.num_players, "hidden": 2},
                "theta_flat": ind.theta.to_flat().tolist(),
                "fitness": ind.fitness,
                "episodes_played": ind.episodes_played,
                "steps_played": ind.steps_played,
            }
            for ind in state.reward_pop
        ],
        "coop_scores": {
            str(pid): {"coop_score": rec.coop_score, "source_episode": rec.source_episode}
            for pid, rec in state.coop_scores.items()
        },
        "pending_groups": [list(g) for g in state.pending_groups],
        "rng": {
            "sampler": generator_state(state.sampler_rng),
            "evo": generator_state(state.evo_rng),
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
    os.replace(tmp, path)


def load_checkpoint(path: str, config: ExperimentConfig | None = None) -> ExperimentState:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise IntegrityError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    if config is None:
        config = parse_config_text(doc["config_text"])
    policy_pop = []
    for item in doc["policy_population"]:
        arrays = {k: _blob_array(v) for k, v in item["params"].items()}
        params = ln.PolicyParams(**arrays)
        opt = ln.OptState(acc={k: _blob_array(v) for k, v in item["opt_acc"].items()})
        policy_pop.append(PolicyIndividual(
            id=item["id"], params=params, hyper=ln.Hyperparams(**item["hyper"]),
            opt=opt, fitness=item["fitness"], episodes_played=item["episodes_played"],
            steps_played=item["steps_played"]))
    reward_pop = []
    for item in doc["reward_population"]:
        theta = RewardNetParams.from_flat(np.asarray(item["theta_flat"]),
                                          item["header"]["num_players"])
        reward_pop.append(RewardIndividual(
            id=item["id"], theta=theta, fitness=item["fitness"],
            episodes_played=item["episodes_played"], steps_played=item["steps_played"]))
    coop = {
        int(pid): CoopRecord(individual_id=int(pid), coop_score=rec["coop_score"],
                             source_episode=rec["source_episode"])
        for pid, rec in doc["coop_scores"].items()
    }
    return ExperimentState(
        config=config,
        policy_pop=policy_pop,
        reward_pop=reward_pop,
        coop_scores=coop,
        pending_groups=[tuple(g) for g in doc["pending_groups"]],
        episode_index=doc["episode"],
        sampler_rng=restore_generator(doc["rng"]["sampler"]),
        evo_rng=restore_generator(doc["rng"]["evo"]),
    )


def latest_checkpoint(run_dir: str) -> str:
    ckpt_dir = RunPaths(run_dir).checkpoints_dir
    try:
        names = sorted(n for n in os.listdir(ckpt_dir)
                       if n.startswith("ckpt_") and n.endswith(".json"))
    except FileNotFoundError:
        names = []
    if not names:
        raise ConfigError(f"no checkpoints under {run_dir!r}")
    return os.path.join(ckpt_dir, names[-1])


def _truncate_outputs(paths: RunPaths, keep_below_episode: int) -> None:
    """Drop rows for episodes >= keep_below_episode (crash-resume hygiene)."""
    for path in (paths.episodes_csv, paths.losses_csv, paths.timings_log):
        with open(path) as fh:
            lines = fh.readlines()
        kept = lines[:2]  # schema comment + header
        for line in lines[2:]:
            episode = int(line.split(",", 1)[0])
            if episode < keep_below_episode:
                kept.append(line)
        with open(path, "w") as fh:
            fh.writelines(kept)
    with open(paths.replay_jsonl) as fh:
        lines = fh.readlines()
    kept = [ln_ for ln_ in lines if json.loads(ln_)["episode"] < keep_below_episode]
    with open(paths.replay_jsonl, "w") as fh:
        fh.writelines(kept)


@dataclass
class RunResult:
    run_dir: str
    episodes_written: int
    flagged_episodes: int


def run_experiment(config: ExperimentConfig, resume: bool = False) -> RunResult:
    """Execute a full training run into config.output_dir.

    With resume=True, restores the latest checkpoint in the run directory,
    truncates outputs past it, and continues to total_episodes.
    """
    run_dir = config.resolved_output_dir()
    paths = RunPaths(run_dir)
    if resume:
        state = load_checkpoint(latest_checkpoint(run_dir), config=config)
        writer = _RunWriter(paths, config, fresh=False)
        _truncate_outputs(paths, state.episode_index)
    else:
        if os.path.exists(paths.episodes_csv):
            raise ConfigError(
                f"{run_dir!r} already holds a run; pass resume or pick a fresh directory")
        config.validate()
        os.makedirs(run_dir, exist_ok=True)
        state = init_state(config)
        writer = _RunWriter(paths, config, fresh=True)

    thetas_by_id = {ind.id: ind for ind in state.reward_pop}
    policies_by_id = {ind.id: ind for ind in state.policy_pop}
    flagged = 0

    while state.episode_index < config.total_episodes:
        episode = state.episode_index
        arena = episode % config.arenas
        assignment = _next_assignment(state)
        seed = episode_seed(config.seed, arena, episode)
        policy_inds = [policies_by_id[pid] for pid in assignment.policy_ids]
        if assignment.mode is RewardMode.NONE:
            thetas = [None] * len(policy_inds)
        else:
            thetas = [thetas_by_id[rid].theta for rid in assignment.reward_ids]

        started = time.perf_counter()
        try:
            result = play_episode(config, policy_inds, thetas, seed)
        except NumericError:
            result = EpisodeResult(
                returns=np.full(config.env.num_players, np.nan),
                intrinsic_returns=np.full(config.env.num_players, np.nan),
                stats=None, actions_log=np.zeros((0, config.env.num_players), dtype=np.int64),
                loss_rows=[], flagged=True)
            flagged += 1
        wall = time.perf_counter() - started

        if not result.flagged:
            assign_fitness(assignment, result.returns, config.env.episode_length,
                           state.policy_pop, state.reward_pop, config.evo)
            _update_coop_scores(state, assignment, result)
        writer.write_episode(episode, arena, seed, assignment, result, wall)
        state.episode_index += 1

        if state.episode_index % config.evolve_every == 0:
            exploit_explore(state.policy_pop, config.evo, state.evo_rng)
            if config.evo.reward_mode is not RewardMode.NONE:
                exploit_explore(state.reward_pop, config.evo, state.evo_rng)
        if state.episode_index % config.checkpoint_every == 0:
            save_checkpoint(state, os.path.join(
                paths.checkpoints_dir, f"ckpt_{state.episode_index:06d}.json"))

    final = os.path.join(paths.checkpoints_dir, f"ckpt_{state.episode_index:06d}.json")
    if not os.path.exists(final):
        save_checkpoint(state, final)
    _write_summary(paths, state, flagged)
    return RunResult(run_dir=run_dir, episodes_written=state.episode_index,
                     flagged_episodes=flagged)


def _write_summary(paths: RunPaths, state: ExperimentState, flagged: int) -> None:
    """Deterministic end-of-run digest next to the CSVs."""
    config = state.config
    best_policy = max(state.policy_pop, key=lambda i: (i.fitness, -i.id))
    doc = {
        "episodes": state.episode_index,
        "flagged_episodes": flagged,
        "game": config.env.game.value,
        "feature_mode": config.feature_mode.value,
        "matchmaking": config.matchmaking.value,
        "reward_mode": config.evo.reward_mode.value,
        "best_policy": {"id": best_policy.id, "fitness": best_policy.fitness,
                         "episodes_played": best_policy.episodes_played},
        "policy_fitness_mean": float(np.mean([i.fitness for i in state.policy_pop])),
        "reward_fitness_mean": float(np.mean([i.fitness for i in state.reward_pop])),
    }
    with open(os.path.join(paths.run_dir, "summary.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
