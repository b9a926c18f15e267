"""Two-population natural selection.

Policy individuals (network weights + evolvable hyperparameters) and reward
individuals (intrinsic-reward genotypes) evolve in separate populations.
Fitness is an exponentially smoothed episode return; selection copies a
clearly fitter peer's payload Lamarckian-style (learned weights included)
and then mutates it. Individuals must accumulate a burn-in of agent steps
before they can copy or be copied, and a fresh copy re-qualifies from zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, IntegrityError
from .learner import Hyperparams, OptState, PolicyParams
from .social_reward import RewardNetParams


class RewardMode(enum.Enum):
    NONE = "none"              # no intrinsic reward at all (u = 0)
    INDIVIDUAL = "individual"  # each policy individual carries its own reward net
    SHARED = "shared"          # one reward net sampled per episode for the whole group


@dataclass
class EvoConfig:
    population_size: int = 50
    mutation_prob: float = 0.1
    multiplicative_step: float = 0.2   # +-20% on learning rate / entropy cost
    additive_step: float = 0.1         # +-0.1 on reward-net parameters
    fitness_smoothing: float = 0.001   # nu in the moving-average fitness
    burn_in_steps: int = 4_000_000     # agent steps before evolution may touch an individual
    reward_mode: RewardMode = RewardMode.SHARED
    exploit_margin: float = 0.2        # fraction of the eligible fitness IQR
    group_fitness_mean: bool = False   # shared mode: smooth toward group mean, not sum

    def validate(self) -> None:
        if self.population_size < 1:
            raise ConfigError("population_size must be positive")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError("mutation_prob must be a probability")
        if not 0.0 <= self.fitness_smoothing <= 1.0:
            raise ConfigError("fitness_smoothing must lie in [0, 1]")
        if self.burn_in_steps < 0:
            raise ConfigError("burn_in_steps must be nonnegative")
        if self.exploit_margin < 0:
            raise ConfigError("exploit_margin must be nonnegative")


@dataclass
class PolicyIndividual:
    id: int
    params: PolicyParams
    hyper: Hyperparams
    opt: OptState
    fitness: float = 0.0
    episodes_played: int = 0
    steps_played: int = 0


@dataclass
class RewardIndividual:
    id: int
    theta: RewardNetParams
    fitness: float = 0.0
    episodes_played: int = 0
    steps_played: int = 0


@dataclass
class GroupAssignment:
    """Who plays one episode: player slot i is policy_ids[i]; reward_ids is
    one reward-net id per slot (empty when intrinsic rewards are off)."""

    policy_ids: tuple
    reward_ids: tuple
    mode: RewardMode


def smooth_fitness(prev: float, episode_return: float, nu: float) -> float:
    """Moving-average fitness: F' = (1 - nu) F + nu R."""
    return (1.0 - nu) * prev + nu * episode_return


def assign_fitness(assignment: GroupAssignment, returns, episode_length: int,
                   policy_pop: list, reward_pop: list, config: EvoConfig) -> None:
    """Fold one episode's returns into the sampled individuals' fitness.

    Policy fitness always smooths toward the player's own extrinsic return.
    Reward-net fitness smooths toward the group total (shared mode) or the
    carrier's own return (individual mode). Step counters advance by agent
    steps: episode_length per policy, episode_length per carrier for a
    reward net.
    """
    returns = np.asarray(returns, dtype=np.float64)
    nu = config.fitness_smoothing
    by_id_p = {ind.id: ind for ind in policy_pop}
    by_id_r = {ind.id: ind for ind in reward_pop}
    for slot, pid in enumerate(assignment.policy_ids):
        if pid not in by_id_p:
            raise IntegrityError(f"episode references unknown policy individual {pid}")
        ind = by_id_p[pid]
        ind.fitness = smooth_fitness(ind.fitness, float(returns[slot]), nu)
        ind.episodes_played += 1
        ind.steps_played += episode_length

    if assignment.mode is RewardMode.NONE:
        return
    if assignment.mode is RewardMode.SHARED:
        rid = assignment.reward_ids[0]
        if rid not in by_id_r:
            raise IntegrityError(f"episode references unknown reward individual {rid}")
        ind = by_id_r[rid]
        group = float(returns.mean() if config.group_fitness_mean else returns.sum())
        ind.fitness = smooth_fitness(ind.fitness, group, nu)
        ind.episodes_played += 1
        ind.steps_played += episode_length * len(assignment.policy_ids)
    else:
        for slot, rid in enumerate(assignment.reward_ids):
            if rid not in by_id_r:
                raise IntegrityError(f"episode references unknown reward individual {rid}")
            ind = by_id_r[rid]
            ind.fitness = smooth_fitness(ind.fitness, float(returns[slot]), nu)
            ind.episodes_played += 1
            ind.steps_played += episode_length


def mutate(individual, config: EvoConfig, rng: np.random.Generator) -> None:
    """Perturb evolvable scalars in place.

    Policy individuals: learning rate and entropy cost each mutate with
    probability mutation_prob by a fair-coin factor of (1 +- step). Policy
    network weights are never mutated (they are inherited, not searched).
    Reward individuals: each genotype entry mutates with probability
    mutation_prob by a fair-coin +-additive_step.
    """
    if isinstance(individual, PolicyIndividual):
        hp = individual.hyper
        lr, ec = hp.learning_rate, hp.entropy_cost
        if rng.random() < config.mutation_prob:
            lr *= 1.0 + config.multiplicative_step if rng.random() < 0.5 else 1.0 - config.multiplicative_step
        if rng.random() < config.mutation_prob:
            ec *= 1.0 + config.multiplicative_step if rng.random() < 0.5 else 1.0 - config.multiplicative_step
        individual.hyper = replace(hp, learning_rate=lr, entropy_cost=ec)
    elif isinstance(individual, RewardIndividual):
        flat = individual.theta.to_flat()
        hit = rng.random(flat.size) < config.mutation_prob
        signs = np.where(rng.random(flat.size) < 0.5, 1.0, -1.0)
        flat = flat + hit * signs * config.additive_step
        individual.theta = RewardNetParams.from_flat(flat, individual.theta.num_players)
    else:
        raise TypeError(f"cannot mutate {type(individual).__name__}")


def copy_payload(dst, src) -> None:
    """Lamarckian inheritance: dst takes src's evolved payload and fitness.

    Policy: network weights, hyperparameters, fitness; the optimizer
    accumulator resets (it belongs to the old weights' trajectory). Reward:
    genotype and fitness. Either way the copy restarts burn-in.
    """
    if isinstance(dst, PolicyIndividual):
        dst.params = src.params.copy()
        dst.hyper = replace(src.hyper)
        dst.opt.reset()
    else:
        dst.theta = src.theta.copy()
    dst.fitness = src.fitness
    dst.episodes_played = 0
    dst.steps_played = 0


def exploit_explore(population: list, config: EvoConfig, rng: np.random.Generator) -> list:
    """One selection pass over a population (either kind), in place.

    Every individual past burn-in compares itself against one uniformly
    sampled eligible peer; if the peer's fitness exceeds its own by more
    than exploit_margin * IQR of eligible fitness, it copies the peer's
    pre-pass payload and mutates. Individuals inside burn-in are neither
    sources nor destinations. Population size never changes.
    """
    eligible = [ind for ind in population if ind.steps_played >= config.burn_in_steps]
    if len(eligible) < 2:
        return population
    fits = np.array([ind.fitness for ind in eligible])
    q75, q25 = np.percentile(fits, [75, 25])
    margin = config.exploit_margin * (q75 - q25)
    # Decisions read a pre-pass snapshot so the outcome does not depend on
    # the iteration order (only rng consumption does).
    snapshot = {}
    for ind in eligible:
        if isinstance(ind, PolicyIndividual):
            payload = PolicyIndividual(id=ind.id, params=ind.params.copy(),
                                       hyper=replace(ind.hyper), opt=ind.opt,
                                       fitness=ind.fitness)
        else:
            payload = RewardIndividual(id=ind.id, theta=ind.theta.copy(), fitness=ind.fitness)
        snapshot[ind.id] = payload
    for ind in sorted(eligible, key=lambda i: i.id):
        peers = [e for e in eligible if e.id != ind.id]
        peer = snapshot[peers[int(rng.integers(len(peers)))].id]
        if peer.fitness > snapshot[ind.id].fitness + margin:
            copy_payload(ind, peer)
            mutate(ind, config, rng)
    return population


def sample_players(policy_pop: list, reward_pop: list, config: EvoConfig,
                   group_size: int, rng: np.random.Generator) -> GroupAssignment:
    """Uniformly sample one episode's group.

    group_size distinct policy individuals always; the reward assignment
    follows the mode (one shared net for everybody, each player's own net,
    or none).
    """
    if len(policy_pop) < group_size:
        raise ConfigError(f"population of {len(policy_pop)} cannot field {group_size} players")
    ids = [ind.id for ind in policy_pop]
    picks = rng.choice(len(ids), size=group_size, replace=False)
    policy_ids = tuple(ids[i] for i in picks)
    if config.reward_mode is RewardMode.SHARED:
        rid = reward_pop[int(rng.integers(len(reward_pop)))].id
        reward_ids = (rid,) * group_size
    elif config.reward_mode is RewardMode.INDIVIDUAL:
        reward_ids = policy_ids
    else:
        reward_ids = ()
    return GroupAssignment(policy_ids=policy_ids, reward_ids=reward_ids,
                           mode=config.reward_mode)
