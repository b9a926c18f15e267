"""Hierarchical deterministic RNG streams.

Every random draw in a run descends from a single master seed through the
path master -> arena -> episode -> role, so single-arena runs replay
bit-exactly and per-arena streams never interact.
"""

import numpy as np


def episode_seed(master_seed: int, arena: int, episode: int) -> int:
    """Stable 64-bit seed for one (arena, episode) slot under a master seed."""
    ss = np.random.SeedSequence([int(master_seed), int(arena), int(episode)])
    return int(ss.generate_state(1, np.uint64)[0])


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one role under `seed`.

    Distinct `key` tuples give statistically independent streams (e.g.
    ``stream(s, 0)`` for the environment, ``stream(s, 1, i)`` for player i).
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def generator_state(rng: np.random.Generator) -> dict:
    """JSON-serializable snapshot of a generator's bit state."""
    return rng.bit_generator.state


def restore_generator(state: dict) -> np.random.Generator:
    """Rebuild a generator from a `generator_state` snapshot."""
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng
