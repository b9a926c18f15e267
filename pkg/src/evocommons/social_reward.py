"""Intrinsic social-preference rewards.

Each player turns a vector of per-player social features (everybody's
recently earned reward, or everybody's expected future reward) into a
scalar intrinsic reward through a tiny two-hidden-unit network. The
network's weights are a genotype: they are evolved across a population,
never trained by gradient descent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

HIDDEN_UNITS = 2
DECAY_ETA_DEFAULT = 0.975


class FeatureMode(enum.Enum):
    RETROSPECTIVE = "retrospective"  # decayed sums of realized extrinsic rewards
    PROSPECTIVE = "prospective"      # extrinsic value-head estimates (gradient-free)


@dataclass
class RewardNetParams:
    """Genotype of the intrinsic reward network u(f) = v . relu(W^T f + b)."""

    W: np.ndarray  # (num_players, HIDDEN_UNITS) input weights
    b: np.ndarray  # (HIDDEN_UNITS,) hidden biases
    v: np.ndarray  # (HIDDEN_UNITS,) output weights

    @property
    def num_players(self) -> int:
        return self.W.shape[0]

    @classmethod
    def zeros(cls, num_players: int) -> "RewardNetParams":
        return cls(
            W=np.zeros((num_players, HIDDEN_UNITS)),
            b=np.zeros(HIDDEN_UNITS),
            v=np.zeros(HIDDEN_UNITS),
        )

    @classmethod
    def random_init(cls, num_players: int, rng: np.random.Generator, scale: float = 0.1) -> "RewardNetParams":
        """Uniform init in [-scale, scale]; small so early intrinsic rewards stay near 0."""
        return cls(
            W=rng.uniform(-scale, scale, size=(num_players, HIDDEN_UNITS)),
            b=rng.uniform(-scale, scale, size=HIDDEN_UNITS),
            v=rng.uniform(-scale, scale, size=HIDDEN_UNITS),
        )

    def copy(self) -> "RewardNetParams":
        return RewardNetParams(W=self.W.copy(), b=self.b.copy(), v=self.v.copy())

    def to_flat(self) -> np.ndarray:
        """Serialize as W column-major, then b, then v (the checkpoint order)."""
        return np.concatenate([self.W.flatten(order="F"), self.b, self.v])

    @classmethod
    def from_flat(cls, flat, num_players: int) -> "RewardNetParams":
        flat = np.asarray(flat, dtype=np.float64)
        expected = num_players * HIDDEN_UNITS + 2 * HIDDEN_UNITS
        if flat.shape != (expected,):
            raise UsageError(f"flat genotype must have {expected} entries, got {flat.shape}")
        nw = num_players * HIDDEN_UNITS
        return cls(
            W=flat[:nw].reshape((num_players, HIDDEN_UNITS), order="F").copy(),
            b=flat[nw:nw + HIDDEN_UNITS].copy(),
            v=flat[nw + HIDDEN_UNITS:].copy(),
        )


@dataclass
class DecayState:
    """Per-player exponentially decayed extrinsic reward, reset to 0 each episode."""

    e: np.ndarray
    eta: float = DECAY_ETA_DEFAULT

    @classmethod
    def zeros(cls, num_players: int, eta: float = DECAY_ETA_DEFAULT) -> "DecayState":
        return cls(e=np.zeros(num_players), eta=eta)


def update_decay(state: DecayState, extrinsic) -> DecayState:
    """One decay step: e' = eta * e + r. Pure; returns a fresh state."""
    r = np.asarray(extrinsic, dtype=np.float64)
    return DecayState(e=state.eta * state.e + r, eta=state.eta)


def reorder_features(raw, receiver: int) -> np.ndarray:
    """Receiver's own feature first, remaining players in ascending id order."""
    raw = np.asarray(raw, dtype=np.float64)
    if not 0 <= receiver < raw.size:
        raise UsageError(f"receiver {receiver} out of range for {raw.size} players")
    rest = np.concatenate([raw[:receiver], raw[receiver + 1:]])
    return np.concatenate([[raw[receiver]], rest])


def build_features(mode: FeatureMode, receiver: int, *, decay: DecayState | None = None,
                   values=None) -> np.ndarray:
    """Social feature vector for one receiver.

    Retrospective features are the decayed realized rewards; prospective
    features are the extrinsic value-head estimates, taken as plain numbers
    (no gradient ever flows through them back into other agents).
    """
    if mode is FeatureMode.RETROSPECTIVE:
        if decay is None:
            raise UsageError("retrospective features require a DecayState")
        raw = decay.e
    elif mode is FeatureMode.PROSPECTIVE:
        if values is None:
            raise UsageError("prospective features require value estimates")
        raw = np.asarray(values, dtype=np.float64)
    else:
        raise UsageError(f"unknown feature mode {mode!r}")
    return reorder_features(raw, receiver)


def intrinsic_reward(theta: RewardNetParams, features) -> float:
    """u(f) = v . relu(W^T f + b)."""
    f = np.asarray(features, dtype=np.float64)
    if f.shape != (theta.W.shape[0],):
        raise UsageError(f"feature vector shape {f.shape} does not match W {theta.W.shape}")
    hidden = np.maximum(theta.W.T @ f + theta.b, 0.0)
    return float(theta.v @ hidden)


def reorder_indices(num_players: int) -> np.ndarray:
    """Row i is the feature order for receiver i (own feature first)."""
    idx = np.empty((num_players, num_players), dtype=np.int64)
    for i in range(num_players):
        idx[i] = [i] + [j for j in range(num_players) if j != i]
    return idx


def intrinsic_rewards_group(theta: RewardNetParams, raw, reorder_idx: np.ndarray) -> np.ndarray:
    """Every receiver's intrinsic reward under one shared genotype, in one
    matrix pass: row i of the feature matrix is reorder(raw, i)."""
    features = np.asarray(raw, dtype=np.float64)[reorder_idx]
    return np.maximum(features @ theta.W + theta.b, 0.0) @ theta.v


def total_reward(extrinsic: float, intrinsic: float) -> float:
    """Reward the policy is trained on: extrinsic plus intrinsic."""
    return extrinsic + intrinsic
