"""Social features and the evolvable intrinsic reward network.

Each step, every player sees a feature vector summarizing how well everybody
has been doing (retrospective: exponentially decayed realized rewards;
prospective: the learners' own value estimates) with its own entry moved to
the front, and maps it through a 2-hidden-unit network to a scalar bonus.
"""

import numpy as np

from evocommons import (
    DecayState,
    FeatureMode,
    RewardNetParams,
    build_features,
    intrinsic_reward,
    total_reward,
    update_decay,
)

# --- temporal decay --------------------------------------------------------

decay = DecayState.zeros(5)
print("decayed-reward trace for a player earning 1.0 on the first 3 steps:")
rewards_per_step = [[1, 0, 0, 0, 0]] * 3 + [[0, 0, 0, 0, 0]] * 5
for t, r in enumerate(rewards_per_step):
    decay = update_decay(decay, r)
    print(f"  t={t}: e_0 = {decay.e[0]:.4f}")
print("(eta = 0.975: the memory outlives the reward by many steps)")

# --- feature reordering ----------------------------------------------------

decay = DecayState(e=np.array([0.5, 1.5, 2.5, 3.5, 4.5]))
for receiver in (0, 2):
    f = build_features(FeatureMode.RETROSPECTIVE, receiver, decay=decay)
    print(f"\nfeatures as seen by player {receiver}: {f}")
print("(own feature always rides in front; the rest keep id order)")

# --- the reward network ----------------------------------------------------

rng = np.random.default_rng(42)
theta = RewardNetParams.random_init(5, rng)
f = build_features(FeatureMode.RETROSPECTIVE, 0, decay=decay)
print(f"\nrandomly initialized genotype gives u(f) = {intrinsic_reward(theta, f):+.4f}")

# A hand-built "altruist": positive output weight on a unit that sums
# everyone else's decayed reward.
altruist = RewardNetParams.zeros(5)
altruist.W[1:, 0] = 1.0   # hidden unit 0 listens to the other players
altruist.v[0] = 0.5
u = intrinsic_reward(altruist, f)
print(f"hand-built other-regarding genotype:  u(f) = {u:+.4f}")
print(f"total reward when extrinsic is +1:    {total_reward(1.0, u):+.4f}")

# An "envious" genotype: own reward suppresses the bonus via ReLU.
envious = RewardNetParams.zeros(5)
envious.W[1:, 0] = 1.0
envious.W[0, 0] = -2.0    # own success gates the unit shut
envious.v[0] = 0.5
for own in (0.0, 2.0, 6.0):
    decayed = DecayState(e=np.array([own, 1.5, 2.5, 3.5, 4.5]))
    f = build_features(FeatureMode.RETROSPECTIVE, 0, decay=decayed)
    print(f"envious genotype, own decayed reward {own:.0f}: "
          f"u = {intrinsic_reward(envious, f):+.4f}")

# --- genotype serialization -------------------------------------------------

flat = theta.to_flat()
print(f"\ngenotype serializes to {flat.size} numbers "
      f"(W column-major, then b, then v); round-trips exactly: "
      f"{np.array_equal(RewardNetParams.from_flat(flat, 5).to_flat(), flat)}")
