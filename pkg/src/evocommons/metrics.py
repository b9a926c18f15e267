"""Per-episode social-outcome metrics.

Collective return, equality (1 - Gini over individual returns), tagging
rate, and sustainability (how late in the episode positive rewards arrive).
"""

from dataclasses import dataclass

import numpy as np

# Column names are part of the CSV schema and must not change.
METRIC_COLUMNS = ("collective_return", "equality", "tagging", "sustainability")


@dataclass
class EpisodeStats:
    """Raw per-episode numbers the metrics are computed from."""

    returns: np.ndarray            # per-player extrinsic return
    tag_fires: np.ndarray          # per-player count of tag beams fired
    positive_reward_steps: list    # per player, timesteps (0-based) with reward > 0
    episode_length: int


def gini(returns) -> float:
    """Gini coefficient of a return vector, in [0, 1 - 1/n].

    Returns may be negative (tag penalties); the vector is shifted so its
    minimum is >= 0 first. A zero-sum vector after shifting (all values
    equal, possibly all zero) counts as perfectly equal (G = 0).

    Uses the sorted O(n log n) identity; equivalence with the O(n^2)
    pairwise-difference definition is pinned by tests.
    """
    x = np.asarray(returns, dtype=np.float64)
    if x.size == 0:
        raise ValueError("gini of an empty return vector")
    x = x - min(0.0, float(x.min()))
    total = float(x.sum())
    if total == 0.0:
        return 0.0
    n = x.size
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return float(2.0 * np.dot(ranks, np.sort(x)) / (n * total) - (n + 1.0) / n)


def equality(returns) -> float:
    """1 - Gini; 1.0 means perfectly equal returns."""
    return 1.0 - gini(returns)


def tagging_rate(stats: EpisodeStats) -> float:
    """Mean number of tag beams fired per player over the episode."""
    return float(np.mean(stats.tag_fires))


def sustainability(stats: EpisodeStats) -> float:
    """Mean timestep (0-based) at which players collect positive reward.

    A player that never earns positive reward contributes episode_length,
    a pessimistic sentinel that keeps the metric monotone when reward
    events are delayed or disappear.
    """
    per_player = []
    for steps in stats.positive_reward_steps:
        arr = np.asarray(steps, dtype=np.float64)
        per_player.append(float(arr.mean()) if arr.size else float(stats.episode_length))
    return float(np.mean(per_player))


def collective_return(returns) -> float:
    """Sum of per-player extrinsic returns (may be negative)."""
    return float(np.sum(np.asarray(returns, dtype=np.float64)))


def metrics_row(stats: EpisodeStats) -> dict:
    """The four metric columns for one episode, keyed by METRIC_COLUMNS."""
    return {
        "collective_return": collective_return(stats.returns),
        "equality": equality(stats.returns),
        "tagging": tagging_rate(stats),
        "sustainability": sustainability(stats),
    }
