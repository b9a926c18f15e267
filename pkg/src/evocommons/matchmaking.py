"""Group formation: uniform random pools or assortative-by-cooperativeness.

Cooperativeness is game-specific: in Cleanup it is how many steps a player
chose the clean action last episode; in Harvest it is how far the player's
return fell below the group mean (earning less than average ranks as more
cooperative). Assortative grouping sorts a pool by score and slices it into
consecutive groups so like plays with like.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError
from .gridworld import Action


class Matchmaking(enum.Enum):
    RANDOM = "random"
    ASSORTATIVE = "assortative"


@dataclass
class CoopRecord:
    individual_id: int
    coop_score: float
    source_episode: int


def coop_score_cleanup(actions) -> float:
    """Steps on which the player chose Clean (whether or not waste was hit)."""
    acts = np.asarray(actions, dtype=np.int64)
    return float(np.count_nonzero(acts == Action.CLEAN))


def coop_score_harvest(own_return: float, all_returns) -> float:
    """Group mean minus own return: below-average earners score high."""
    all_returns = np.asarray(all_returns, dtype=np.float64)
    if all_returns.size == 0:
        raise UsageError("all_returns must be nonempty")
    return float(all_returns.mean() - own_return)


def assortative_groups(records, group_size: int, rng: np.random.Generator) -> list:
    """Partition records into consecutive rank blocks of group_size ids.

    Sorting is by descending score; ties break by a seeded shuffle, then by
    id. The record count must be a multiple of group_size (the caller
    samples pools accordingly).
    """
    records = list(records)
    if len(records) % group_size != 0:
        raise UsageError(f"{len(records)} records do not divide into groups of {group_size}")
    shuffle_rank = rng.permutation(len(records))
    order = sorted(range(len(records)),
                   key=lambda i: (-records[i].coop_score, shuffle_rank[i], records[i].individual_id))
    ranked = [records[i].individual_id for i in order]
    return [tuple(ranked[i:i + group_size]) for i in range(0, len(ranked), group_size)]


def random_groups(ids, group_size: int, rng: np.random.Generator) -> list:
    """Uniform partition of a pool into groups of group_size distinct ids.

    Any remainder after the last full group is dropped for this round.
    """
    ids = list(ids)
    if len(ids) < group_size:
        raise ConfigError(f"pool of {len(ids)} cannot form a group of {group_size}")
    perm = [ids[i] for i in rng.permutation(len(ids))]
    n_groups = len(perm) // group_size
    return [tuple(perm[i * group_size:(i + 1) * group_size]) for i in range(n_groups)]
