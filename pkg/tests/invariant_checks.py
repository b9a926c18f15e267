"""Step-by-step environment invariant checker shared by the unit and
acceptance suites."""

import numpy as np

from evocommons import gridworld as gw


class InvariantViolation(AssertionError):
    pass


def _check(cond, msg):
    if not cond:
        raise InvariantViolation(msg)


def run_checked_episode(config: gw.EnvConfig, seed: int, steps: int,
                        action_rng: np.random.Generator) -> dict:
    """Drive `steps` random actions through one env, asserting the gridworld
    invariants after every step. Returns aggregate counters."""
    state = gw.reset(config, seed)
    field_set = {(int(y), int(x)) for y, x in state.field_spots}
    aquifer_set = {(int(y), int(x)) for y, x in state.aquifer_spots}
    totals = {"reward": 0.0, "apples": 0, "fires": 0, "hits": 0, "cleaned": 0}

    if config.game is gw.GameKind.CLEANUP:
        _check(int((state.cells == gw.Cell.APPLE).sum()) == 0,
               "cleanup must reset with zero apples")
        _check(gw.cleanup_spawn_probability(state.waste_level, config) == 0.0,
               "cleanup must reset with zero spawn probability")

    for _ in range(steps):
        if state.done:
            break
        apples_before = int((state.cells == gw.Cell.APPLE).sum())
        waste_before = state.waste_level
        actions = action_rng.integers(0, config.action_count, size=config.num_players)
        out = gw.step(state, actions)

        eaten = sum(1 for e in out.events if isinstance(e, gw.AppleEaten))
        fires = sum(1 for e in out.events if isinstance(e, gw.TagFired))
        hits = sum(1 for e in out.events if isinstance(e, gw.Tagged))
        cleaned = sum(len(e.cells) for e in out.events if isinstance(e, gw.Cleaned))

        # Reward accounting identity, exact.
        expected = (config.apple_reward * eaten - config.tag_cost * fires
                    - config.tag_penalty * hits)
        _check(float(out.rewards.sum()) == expected,
               f"reward accounting broke at t={state.t}")

        # Apple conservation: removal only by consumption; spawns only onto
        # empty field soil.
        apples_after = int((state.cells == gw.Cell.APPLE).sum())
        spawned = apples_after - apples_before + eaten
        _check(spawned >= 0, "apples vanished without being eaten")
        apple_cells = {(int(y), int(x)) for y, x in np.argwhere(state.cells == gw.Cell.APPLE)}
        _check(apple_cells <= field_set, "apple appeared off the field")

        # Waste bounds and bookkeeping.
        _check(0 <= state.waste_level <= config.waste_critical,
               f"waste level {state.waste_level} out of bounds")
        waste_cells = {(int(y), int(x)) for y, x in np.argwhere(state.cells == gw.Cell.WASTE)}
        _check(len(waste_cells) == state.waste_level, "waste level != waste cell count")
        _check(waste_cells <= aquifer_set, "waste appeared off the aquifer")
        _check(state.waste_level >= waste_before - cleaned,
               "waste decreased by more than was cleaned")
        if cleaned == 0:
            _check(state.waste_level >= waste_before, "waste decreased without cleaning")

        # Spawn-probability monotonicity around the current level.
        if config.game is gw.GameKind.CLEANUP and state.waste_level >= 1:
            _check(gw.cleanup_spawn_probability(state.waste_level, config)
                   <= gw.cleanup_spawn_probability(state.waste_level - 1, config),
                   "cleanup spawn probability not nonincreasing")

        # Player geometry.
        active = [p for p in state.players if p.removed_for == 0]
        positions = [p.pos for p in active]
        _check(len(positions) == len(set(positions)), "two players share a cell")
        for p in active:
            _check(state.cells[p.pos[1], p.pos[0]] != gw.Cell.WALL, "player inside a wall")

        totals["reward"] += float(out.rewards.sum())
        totals["apples"] += eaten
        totals["fires"] += fires
        totals["hits"] += hits
        totals["cleaned"] += cleaned
    return totals
