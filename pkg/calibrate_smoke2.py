"""Calibration round 2 (not shipped): stronger selection + sharper dilemma.

Variants:
  A: 1200 episodes, evolve_every 2, fitness_smoothing 0.05 (saturates at
     desk-scale episode counts), default respawn table
  B: 800 episodes, same evolution settings, half-rate respawn table so
     depletion costs more
Two worker processes (the box has 2 cores).
"""

import itertools
import json
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

VARIANTS = {
    "A": dict(episodes=1200, table=(0.0, 0.005, 0.02, 0.05)),
    "B": dict(episodes=800, table=(0.0, 0.0025, 0.01, 0.025)),
}
SEEDS = range(6)


def one(args):
    variant, mode_value, seed, root = args
    from evocommons.config import mini_harvest_config
    from evocommons.evolution import RewardMode
    from evocommons.harness import run_experiment
    from evocommons.reports import read_episode_table

    spec = VARIANTS[variant]
    cfg = mini_harvest_config(
        total_episodes=spec["episodes"], seed=seed, evolve_every=2,
        output_dir=f"{root}/{variant}_{mode_value}_s{seed}")
    cfg.env.harvest_spawn_table = spec["table"]
    cfg.evo.reward_mode = RewardMode(mode_value)
    cfg.evo.burn_in_steps = 4000
    cfg.evo.fitness_smoothing = 0.05
    cfg.learner.learning_rate_init = 2e-3
    run_experiment(cfg)
    t = read_episode_table(cfg.output_dir)
    q = spec["episodes"] // 4
    return variant, mode_value, seed, dict(
        ret_mean=float(np.mean(t["collective_return"])),
        ret_last=float(np.mean(t["collective_return"][-q:])),
        sus_first=float(np.mean(t["sustainability"][:q])),
        sus_last=float(np.mean(t["sustainability"][-q:])),
        tag_mean=float(np.mean(t["tagging"])),
    )


def main():
    root = tempfile.mkdtemp(prefix="cal3_")
    jobs = [(v, m, s, root) for v in VARIANTS for s in SEEDS
            for m in ("none", "shared")]
    results = {}
    t0 = time.time()
    with ProcessPoolExecutor(max_workers=2) as pool:
        for variant, mode, seed, stats in pool.map(one, jobs):
            results[(variant, mode, seed)] = stats
            print(f"{variant} {mode:6s} s={seed}: mean {stats['ret_mean']:7.1f} "
                  f"last {stats['ret_last']:7.1f} sus {stats['sus_first']:5.1f}->"
                  f"{stats['sus_last']:5.1f} tag {stats['tag_mean']:4.1f}", flush=True)
    for variant in VARIANTS:
        mean_wins = sum(results[(variant, "shared", s)]["ret_mean"]
                        >= results[(variant, "none", s)]["ret_mean"] for s in SEEDS)
        last_wins = sum(results[(variant, "shared", s)]["ret_last"]
                        >= results[(variant, "none", s)]["ret_last"] for s in SEEDS)
        print(f"variant {variant}: mean>= {mean_wins}/6, last>= {last_wins}/6")
    print(f"total {time.time() - t0:.0f}s")
    json.dump({f"{v}_{m}_{s}": st for (v, m, s), st in results.items()},
              open("/tmp/smoke_cal3.json", "w"), indent=1)


if __name__ == "__main__":
    main()
