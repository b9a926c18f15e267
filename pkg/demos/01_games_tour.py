"""A tour of the two commons-dilemma games.

Cleanup: apples spawn in a field only while a geographically separate
aquifer is clean; episodes start saturated (zero spawning), so somebody has
to leave the field and clean. Harvest: apples respawn near other apples and
never respawn once a patch is wiped out.
"""

import numpy as np

from evocommons import (
    Action,
    EnvConfig,
    GameKind,
    cleanup_spawn_probability,
    gini,
    reset,
    step,
)
from evocommons.gridworld import Cell, render_ascii

# --- Cleanup: barren and saturated at reset -------------------------------

config = EnvConfig(game=GameKind.CLEANUP, episode_length=200)
state = reset(config, seed=7)
print("Cleanup at reset (w = waste, ~ = clean aquifer, , = field soil):")
print(render_ascii(state))
print(f"\napples on map: {int((state.cells == Cell.APPLE).sum())}")
print(f"waste level:   {state.waste_level} / critical {config.waste_critical}")
print(f"spawn probability right now: "
      f"{cleanup_spawn_probability(state.waste_level, config)}")

# Clean a few cells by hand and watch the spawn rate recover.
for level in (40, 30, 20, 10, 0):
    print(f"  waste {level:2d} -> per-cell spawn p = "
          f"{cleanup_spawn_probability(level, config):.4f}")

# --- Harvest: patches die when over-harvested ------------------------------

config = EnvConfig(game=GameKind.HARVEST, episode_length=300)
state = reset(config, seed=7)
print("\nHarvest at reset (A = apple):")
print(render_ascii(state))

# Random rollout: watch the apple stock move.
rng = np.random.default_rng(0)
stock = []
returns = np.zeros(config.num_players)
while not state.done:
    actions = rng.integers(0, config.action_count, size=config.num_players)
    outcome = step(state, actions)
    returns += outcome.rewards
    stock.append(int((state.cells == Cell.APPLE).sum()))

print(f"\nafter {state.t} random steps:")
print(f"  apple stock trajectory: start {stock[0]}, "
      f"min {min(stock)}, end {stock[-1]}")
print(f"  per-player returns: {returns}")
print(f"  return inequality (Gini): {gini(returns):.3f}")

# --- The tag beam ----------------------------------------------------------

state = reset(EnvConfig(game=GameKind.HARVEST, episode_length=10), seed=1)
p0 = state.players[0]
print(f"\nplayer 0 at {p0.pos} facing {'NESW'[p0.orientation]} fires a tag:")
actions = [Action.ROTATE_LEFT] * config.num_players
actions[0] = Action.TAG
outcome = step(state, actions)
print(f"  rewards: {outcome.rewards}   (tagging costs 1; victims lose 50)")
print(f"  events:  {outcome.events}")
