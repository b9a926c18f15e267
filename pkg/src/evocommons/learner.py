"""Compact actor-critic learner.

A feed-forward encoder over the symbolic observation window (plus last
action and last rewards as auxiliary inputs) feeds a softmax policy head and
two separate value heads: one predicting discounted extrinsic returns, one
predicting discounted intrinsic returns. The policy gradient uses the
combined advantage, values regress on their own n-step targets, and an
entropy bonus discourages premature collapse. Updates are single
RMSProp-style steps over one unroll segment.

All arithmetic is float64 numpy; gradients are derived by hand and pinned
against central finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError
from .gridworld import NUM_OBS_CODES

RMSPROP_DECAY = 0.99
RMSPROP_EPSILON = 1e-5

# Parameter array names in a fixed order (used by flatten/unflatten).
PARAM_FIELDS = ("w_enc", "b_enc", "w_pol", "b_pol", "w_ve", "b_ve", "w_vi", "b_vi")


@dataclass
class Hyperparams:
    """Per-individual learner hyperparameters.

    learning_rate and entropy_cost are evolvable; baseline_cost and discount
    stay fixed for the whole run.
    """

    learning_rate: float = 4e-4
    entropy_cost: float = 1e-3
    baseline_cost: float = 0.25
    discount: float = 0.99


def sample_entropy_cost(rng: np.random.Generator, low: float = 2e-4, high: float = 0.01) -> float:
    """Log-uniform draw, the conventional way to seed an entropy coefficient."""
    return float(np.exp(rng.uniform(np.log(low), np.log(high))))


@dataclass
class PolicyParams:
    """Weights of one policy network (encoder + policy head + two value heads)."""

    w_enc: np.ndarray  # (in_dim, hidden)
    b_enc: np.ndarray  # (hidden,)
    w_pol: np.ndarray  # (hidden, actions)
    b_pol: np.ndarray  # (actions,)
    w_ve: np.ndarray   # (hidden,)
    b_ve: np.ndarray   # () scalar array
    w_vi: np.ndarray   # (hidden,)
    b_vi: np.ndarray   # () scalar array

    @classmethod
    def init(cls, in_dim: int, hidden: int, actions: int,
             rng: np.random.Generator) -> "PolicyParams":
        """Random encoder, zero heads: the initial policy is exactly uniform
        and both value heads read 0 everywhere."""
        return cls(
            w_enc=rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, hidden)),
            b_enc=np.zeros(hidden),
            w_pol=np.zeros((hidden, actions)),
            b_pol=np.zeros(actions),
            w_ve=np.zeros(hidden),
            b_ve=np.zeros(()),
            w_vi=np.zeros(hidden),
            b_vi=np.zeros(()),
        )

    @classmethod
    def zeros(cls, in_dim: int, hidden: int, actions: int) -> "PolicyParams":
        rng = np.random.default_rng(0)
        p = cls.init(in_dim, hidden, actions, rng)
        p.w_enc = np.zeros_like(p.w_enc)
        return p

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{name: getattr(self, name).copy() for name in PARAM_FIELDS})

    def arrays(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def to_flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in PARAM_FIELDS])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for name in PARAM_FIELDS:
            arr = getattr(self, name)
            n = arr.size
            arr[...] = flat[i:i + n].reshape(arr.shape)
            i += n
        if i != flat.size:
            raise UsageError("flat vector length does not match parameter shapes")


@dataclass
class OptState:
    """RMSProp accumulator (squared-gradient moving average) per parameter."""

    acc: dict
    decay: float = RMSPROP_DECAY
    epsilon: float = RMSPROP_EPSILON
    momentum: float = 0.0  # kept for the record; no momentum buffer exists

    @classmethod
    def for_params(cls, params: PolicyParams) -> "OptState":
        return cls(acc={name: np.zeros_like(arr) for name, arr in params.arrays().items()})

    def reset(self) -> None:
        for arr in self.acc.values():
            arr[...] = 0.0


@dataclass
class Segment:
    """One unroll segment of a single player's trajectory.

    values are the heads' outputs under the acting parameters; bootstraps
    are the heads' outputs at the segment-boundary observation (0.0 at
    episode end).
    """

    inputs: np.ndarray       # (T, in_dim)
    actions: np.ndarray      # (T,) int
    logprobs: np.ndarray     # (T,)
    rewards_e: np.ndarray    # (T,)
    rewards_i: np.ndarray    # (T,)
    values_e: np.ndarray     # (T,)
    values_i: np.ndarray     # (T,)
    bootstrap_e: float
    bootstrap_i: float


def encoding_dim(obs_window: int, action_count: int) -> int:
    """Input width: one-hot window planes + one-hot last action + last u + last r^E."""
    return obs_window * obs_window * NUM_OBS_CODES + action_count + 2


_CELL_OFFSETS: dict = {}


def encode_observation(window: np.ndarray, last_action: int | None, last_u: float,
                       last_re: float, action_count: int) -> np.ndarray:
    """Flatten a symbolic window into the learner's input vector."""
    size = window.size
    offsets = _CELL_OFFSETS.get(size)
    if offsets is None:
        offsets = _CELL_OFFSETS.setdefault(size, np.arange(size) * NUM_OBS_CODES)
    out = np.zeros(size * NUM_OBS_CODES + action_count + 2)
    out[offsets + window.ravel()] = 1.0
    if last_action is not None:
        out[size * NUM_OBS_CODES + int(last_action)] = 1.0
    out[-2] = last_u
    out[-1] = last_re
    return out


def _forward(params: PolicyParams, x: np.ndarray):
    """Shared forward pass. x may be (in_dim,) or (T, in_dim)."""
    h_pre = x @ params.w_enc + params.b_enc
    h = np.maximum(h_pre, 0.0)
    logits = h @ params.w_pol + params.b_pol
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    ve = h @ params.w_ve + params.b_ve
    vi = h @ params.w_vi + params.b_vi
    return h_pre, h, logits, logp, ve, vi


def act(params: PolicyParams, x: np.ndarray, rng: np.random.Generator):
    """Sample an action for one encoded observation.

    Returns (action, log-probability, V^E, V^I). Deterministic given the
    rng state; raises NumericError on non-finite logits.
    """
    _, _, logits, logp, ve, vi = _forward(params, x)
    if not np.all(np.isfinite(logits)):
        raise NumericError("policy produced non-finite logits")
    cdf = np.cumsum(np.exp(logp))
    action = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    action = min(action, len(logp) - 1)
    return action, float(logp[action]), float(ve), float(vi)


def state_values(params: PolicyParams, x: np.ndarray) -> tuple:
    """(V^E, V^I) at one encoded observation (e.g. a segment boundary)."""
    _, _, _, _, ve, vi = _forward(params, x)
    return float(ve), float(vi)


def discounted_returns(rewards: np.ndarray, bootstrap: float, discount: float) -> np.ndarray:
    out = np.empty(len(rewards))
    g = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + discount * g
        out[t] = g
    return out


def compute_targets(segment: Segment, discount: float):
    """n-step returns for both reward channels plus the combined advantage.

    Extrinsic and intrinsic returns are discounted separately, each
    bootstrapped from its own value head at the segment boundary; the policy
    advantage is their sum minus the sum of the recorded values.
    """
    ge = discounted_returns(segment.rewards_e, segment.bootstrap_e, discount)
    gi = discounted_returns(segment.rewards_i, segment.bootstrap_i, discount)
    adv = (ge + gi) - (segment.values_e + segment.values_i)
    return ge, gi, adv


def loss_and_grads(params: PolicyParams, segment: Segment, ge: np.ndarray,
                   gi: np.ndarray, adv: np.ndarray, hp: Hyperparams):
    """Total loss and analytic gradients over one segment.

    loss = -sum_t adv_t * log pi(a_t)
           + baseline_cost * sum_t [(G^E-V^E)^2 + (G^I-V^I)^2]
           - entropy_cost * sum_t H(pi(.|s_t))

    Targets and advantages are constants here; gradients flow only through
    the recomputed network outputs.
    """
    x = segment.inputs
    a = segment.actions
    t_len = len(a)
    h_pre, h, logits, logp, ve, vi = _forward(params, x)
    p = np.exp(logp)

    chosen = logp[np.arange(t_len), a]
    entropy = -(p * logp).sum(axis=1)
    err_e = ge - ve
    err_i = gi - vi
    pol_loss = -(adv * chosen).sum()
    val_loss_e = (err_e ** 2).sum()
    val_loss_i = (err_i ** 2).sum()
    ent_sum = entropy.sum()
    loss = pol_loss + hp.baseline_cost * (val_loss_e + val_loss_i) - hp.entropy_cost * ent_sum

    one_hot = np.zeros_like(p)
    one_hot[np.arange(t_len), a] = 1.0
    d_logits = adv[:, None] * (p - one_hot) + hp.entropy_cost * p * (logp + entropy[:, None])
    d_ve = -2.0 * hp.baseline_cost * err_e
    d_vi = -2.0 * hp.baseline_cost * err_i
    d_h = d_logits @ params.w_pol.T + d_ve[:, None] * params.w_ve + d_vi[:, None] * params.w_vi
    d_hpre = d_h * (h_pre > 0.0)

    grads = {
        "w_enc": x.T @ d_hpre,
        "b_enc": d_hpre.sum(axis=0),
        "w_pol": h.T @ d_logits,
        "b_pol": d_logits.sum(axis=0),
        "w_ve": h.T @ d_ve,
        "b_ve": np.asarray(d_ve.sum()),
        "w_vi": h.T @ d_vi,
        "b_vi": np.asarray(d_vi.sum()),
    }
    report = {
        "loss": float(loss),
        "policy_loss": float(pol_loss),
        "value_loss_e": float(val_loss_e),
        "value_loss_i": float(val_loss_i),
        "entropy": float(ent_sum),
    }
    return loss, grads, report


def segment_loss(params: PolicyParams, segment: Segment, ge, gi, adv, hp: Hyperparams) -> float:
    """Scalar loss only; the finite-difference oracle drives this."""
    loss, _, _ = loss_and_grads(params, segment, ge, gi, adv, hp)
    return float(loss)


def update(params: PolicyParams, opt: OptState, segment: Segment, hp: Hyperparams) -> dict:
    """One RMSProp step on a segment. Mutates params and opt in place.

    Returns the loss report; if the loss or any gradient is non-finite the
    step is skipped and the report carries skipped=True.
    """
    ge, gi, adv = compute_targets(segment, hp.discount)
    loss, grads, report = loss_and_grads(params, segment, ge, gi, adv, hp)
    sq_norm = 0.0
    finite = np.isfinite(loss)
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            finite = False
            break
        sq_norm += float((g * g).sum())
    report["grad_norm"] = float(np.sqrt(sq_norm)) if finite else float("nan")
    report["skipped"] = not finite
    if not finite:
        return report
    arrays = params.arrays()
    for name, g in grads.items():
        acc = opt.acc[name]
        acc *= opt.decay
        acc += (1.0 - opt.decay) * g * g
        arrays[name] -= hp.learning_rate * g / np.sqrt(acc + opt.epsilon)
    return report
