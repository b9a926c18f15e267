"""One-off calibration sweep for the directional smoke test (not shipped).

Runs mini-Harvest under reward_mode none vs shared across seeds and learning
rates, and prints first/last-quarter sustainability plus final-quarter mean
collective return, so the smoke budget and config can be pinned from
evidence rather than hope.
"""

import itertools
import json
import sys
import tempfile
import time

import numpy as np

from evocommons.config import mini_harvest_config
from evocommons.evolution import RewardMode
from evocommons.harness import run_experiment
from evocommons.reports import read_episode_table

EPISODES = int(sys.argv[1]) if len(sys.argv) > 1 else 220
SEEDS = list(range(int(sys.argv[2]) if len(sys.argv) > 2 else 8))
LRS = [2e-3, 5e-3]

def one_run(mode, seed, lr, root):
    cfg = mini_harvest_config(
        total_episodes=EPISODES,
        seed=seed,
        evolve_every=5,
        output_dir=f"{root}/{mode.value}_s{seed}_lr{lr}",
    )
    cfg.evo.reward_mode = mode
    cfg.evo.burn_in_steps = 4000
    cfg.learner.learning_rate_init = lr
    run_experiment(cfg)
    table = read_episode_table(cfg.output_dir)
    q = EPISODES // 4
    return {
        "ret_first": float(np.mean(table["collective_return"][:q])),
        "ret_last": float(np.mean(table["collective_return"][-q:])),
        "sus_first": float(np.mean(table["sustainability"][:q])),
        "sus_last": float(np.mean(table["sustainability"][-q:])),
        "tag_first": float(np.mean(table["tagging"][:q])),
        "tag_last": float(np.mean(table["tagging"][-q:])),
    }

def main():
    root = tempfile.mkdtemp(prefix="smoke_cal_")
    results = {}
    t0 = time.time()
    for lr, seed in itertools.product(LRS, SEEDS):
        row = {}
        for mode in (RewardMode.NONE, RewardMode.SHARED):
            row[mode.value] = one_run(mode, seed, lr, root)
        results[f"lr{lr}_s{seed}"] = row
        none, shared = row["none"], row["shared"]
        print(f"lr={lr} seed={seed}: "
              f"none ret {none['ret_first']:8.1f} -> {none['ret_last']:8.1f} "
              f"sus {none['sus_first']:5.1f}->{none['sus_last']:5.1f} "
              f"tag {none['tag_first']:4.1f}->{none['tag_last']:4.1f} | "
              f"shared ret {shared['ret_first']:8.1f} -> {shared['ret_last']:8.1f} "
              f"sus {shared['sus_first']:5.1f}->{shared['sus_last']:5.1f} "
              f"| shared>=none: {shared['ret_last'] >= none['ret_last']}",
              flush=True)
    print(f"total {time.time()-t0:.0f}s, runs in {root}")
    with open("/tmp/smoke_calibration.json", "w") as fh:
        json.dump(results, fh, indent=1)

if __name__ == "__main__":
    main()
