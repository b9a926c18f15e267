"""Two-population selection and group formation.

Fitness is a slow moving average of episode returns; individuals past their
burn-in copy clearly fitter peers (weights included) and mutate. Matchmaking
either samples groups uniformly or sorts players by recent cooperativeness
so like plays with like.
"""

import numpy as np

from evocommons import (
    CoopRecord,
    EvoConfig,
    RewardIndividual,
    RewardMode,
    assortative_groups,
    coop_score_harvest,
    exploit_explore,
    random_groups,
    smooth_fitness,
)
from evocommons.social_reward import RewardNetParams

# --- fitness smoothing ------------------------------------------------------

print("fitness after repeated episode returns of 100 (nu = 0.001):")
for n in (1, 10, 100, 1000, 5000):
    f = 0.0
    for _ in range(n):
        f = smooth_fitness(f, 100.0, 0.001)
    print(f"  {n:5d} episodes -> F = {f:7.3f}")
print("(the average forgets slowly: one lucky episode cannot hijack selection)")

# --- selection pressure on a toy landscape ----------------------------------

# Reward individuals whose "quality" is the first genotype entry; episode
# returns are noisy readouts of quality. Selection should drag the population
# toward the best individual's genotype.
rng = np.random.default_rng(0)
pop = []
for i in range(16):
    theta = RewardNetParams.zeros(5)
    theta.W[0, 0] = rng.uniform(-1, 1)
    pop.append(RewardIndividual(id=i, theta=theta))

config = EvoConfig(population_size=16, burn_in_steps=500,
                   reward_mode=RewardMode.SHARED, exploit_margin=0.1)
evo_rng = np.random.default_rng(1)
for generation in range(400):
    for ind in pop:
        quality = ind.theta.W[0, 0]
        ret = 100.0 * quality + rng.normal(scale=5.0)
        ind.fitness = smooth_fitness(ind.fitness, ret, nu=0.05)
        ind.steps_played += 100
    exploit_explore(pop, config, evo_rng)
    if generation % 100 == 0 or generation == 399:
        qualities = [ind.theta.W[0, 0] for ind in pop]
        print(f"  generation {generation:3d}: mean quality {np.mean(qualities):+.3f} "
              f"(best {max(qualities):+.3f})")
print("(mutation keeps exploring +-0.1 around the incumbent optimum)")

# --- matchmaking ------------------------------------------------------------

rng = np.random.default_rng(2)
returns = rng.integers(0, 30, size=10).astype(float)
records = [CoopRecord(individual_id=i,
                      coop_score=coop_score_harvest(returns[i], returns),
                      source_episode=0)
           for i in range(10)]
print("\nper-player returns:       ", returns)
print("cooperativeness (mean-own):", np.round([r.coop_score for r in records], 1))

groups = assortative_groups(records, 5, rng)
print(f"assortative groups of 5:  {groups[0]} (cooperators) vs {groups[1]} (earners)")

print("random groups, same pool: ", random_groups(range(10), 5, rng))
print("(random mode never looks at the scores)")
