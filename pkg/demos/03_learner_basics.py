"""The actor-critic learner, outside the full harness.

Shows the policy/value interfaces, verifies the hand-derived gradients
against finite differences, and trains a lone agent on an open mini map to
chase apples: returns should climb within a couple hundred episodes.
"""

import numpy as np

from evocommons import EnvConfig, GameKind, Hyperparams, OptState, PolicyParams, reset, step
from evocommons import learner as ln
from evocommons.rng import stream

# --- the interfaces ---------------------------------------------------------

params = PolicyParams.zeros(in_dim=6, hidden=4, actions=7)
rng = np.random.default_rng(0)
a, logp, ve, vi = ln.act(params, np.ones(6), rng)
print(f"zero-initialized policy: action {a}, log-prob {logp:.4f} "
      f"(uniform over 7 = {np.log(1/7):.4f}), V^E={ve}, V^I={vi}")

# --- gradient sanity against the finite-difference oracle -------------------

rng = np.random.default_rng(1)
p = PolicyParams.init(8, 4, 3, rng)
p.w_pol = rng.normal(scale=0.5, size=p.w_pol.shape)
seg = ln.Segment(
    inputs=rng.normal(size=(5, 8)), actions=rng.integers(0, 3, size=5),
    logprobs=np.zeros(5), rewards_e=rng.normal(size=5), rewards_i=rng.normal(size=5),
    values_e=rng.normal(size=5), values_i=rng.normal(size=5),
    bootstrap_e=0.0, bootstrap_i=0.0)
hp = Hyperparams(entropy_cost=3e-3)
ge, gi, adv = ln.compute_targets(seg, hp.discount)
_, grads, _ = ln.loss_and_grads(p, seg, ge, gi, adv, hp)
analytic = np.concatenate([grads[n].ravel() for n in ln.PARAM_FIELDS])

flat = p.to_flat()
numeric = np.zeros_like(flat)
h = 1e-5
for i in range(flat.size):
    for sign in (1.0, -1.0):
        bumped = flat.copy()
        bumped[i] += sign * h
        p.set_flat(bumped)
        numeric[i] += sign * ln.segment_loss(p, seg, ge, gi, adv, hp) / (2 * h)
p.set_flat(flat)
rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
print(f"analytic vs finite-difference gradient, relative error: {rel:.2e}")

# --- a lone forager learns to eat -------------------------------------------

LAYOUT = """\
############
#..........#
#..FAAAF...#
#..FAAAF...#
#..FAAAF...#
#.....P....#
#..........#
############
"""
cfg = EnvConfig(game=GameKind.HARVEST, layout=LAYOUT, num_players=1,
                episode_length=60, obs_window=5,
                harvest_spawn_table=(0.0, 0.02, 0.05, 0.1))
in_dim = ln.encoding_dim(cfg.obs_window, cfg.action_count)
rng = np.random.default_rng(3)
params = PolicyParams.init(in_dim, 32, cfg.action_count, rng)
opt = OptState.for_params(params)
hp = Hyperparams(learning_rate=6e-3, entropy_cost=3e-3)

def and_obs(state):
    from evocommons.gridworld import observe
    return observe(state, 0).window

returns = []
for ep in range(300):
    state = reset(cfg, seed=ep)
    arng = stream(ep, 1)
    enc = ln.encode_observation(and_obs(state), None, 0.0, 0.0, cfg.action_count)
    buf = []
    total = 0.0
    for t in range(cfg.episode_length):
        a, logp, ve, vi = ln.act(params, enc, arng)
        out = step(state, [a])
        r = float(out.rewards[0])
        total += r
        buf.append((enc, a, r, ve, vi))
        enc = ln.encode_observation(out.observations[0].window, a, 0.0, r,
                                    cfg.action_count)
    seg = ln.Segment(
        inputs=np.array([b[0] for b in buf]),
        actions=np.array([b[1] for b in buf]),
        logprobs=np.zeros(len(buf)),
        rewards_e=np.array([b[2] for b in buf]),
        rewards_i=np.zeros(len(buf)),
        values_e=np.array([b[3] for b in buf]),
        values_i=np.array([b[4] for b in buf]),
        bootstrap_e=0.0, bootstrap_i=0.0)
    ln.update(params, opt, seg, hp)
    returns.append(total)

chunk = 50
print("\nlone-forager mean return by 50-episode block:")
for i in range(0, 300, chunk):
    print(f"  episodes {i:3d}-{i + chunk - 1:3d}: {np.mean(returns[i:i + chunk]):6.2f}")
