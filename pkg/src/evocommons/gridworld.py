"""Cleanup and Harvest: two partially observable commons-dilemma grid games.

Players move, rotate, tag, and (in Cleanup) clean on a walled grid. Apples
are the only source of positive reward. In Cleanup the apple field's spawn
rate falls linearly as an aquifer fills with waste, reaching zero at
saturation, so somebody has to clean for anybody to earn. In Harvest apples
respawn at a rate that grows with the number of nearby apples and is zero
when none remain in range, so over-harvesting kills patches for good.

An EnvState is a plain mutable record owned by one caller at a time; all
dynamics are deterministic functions of (config, seed, action sequence).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.signal import convolve2d

from .errors import ConfigError, UsageError


class Cell(enum.IntEnum):
    """Mutable grid cell contents. FIELD/AQUIFER are the bare soils apples
    and waste occupy when present."""

    EMPTY = 0
    WALL = 1
    APPLE = 2
    WASTE = 3
    FIELD = 4
    AQUIFER = 5


# Observation vocabulary: the six cell codes plus four player codes carrying
# orientation relative to the observer (up/right/down/left).
PLAYER_CODE_BASE = 6
NUM_OBS_CODES = 10


class Action(enum.IntEnum):
    MOVE_FORWARD = 0
    MOVE_BACKWARD = 1
    STRAFE_LEFT = 2
    STRAFE_RIGHT = 3
    ROTATE_LEFT = 4
    ROTATE_RIGHT = 5
    TAG = 6
    CLEAN = 7


class GameKind(enum.Enum):
    CLEANUP = "cleanup"
    HARVEST = "harvest"

    @property
    def action_count(self) -> int:
        """Cleanup has the extra Clean action; Harvest does not."""
        return 8 if self is GameKind.CLEANUP else 7


# Orientations are indexed 0..3 = N, E, S, W; y grows downward.
ORIENT_VECS = ((0, -1), (1, 0), (0, 1), (-1, 0))

DEFAULT_LAYOUT_NAMES = {GameKind.CLEANUP: "cleanup_default", GameKind.HARVEST: "harvest_default"}

_LAYOUT_CHARS = {
    "#": Cell.WALL,
    ".": Cell.EMPTY,
    "A": Cell.APPLE,    # apple-field soil holding an initial apple
    "F": Cell.FIELD,
    "Q": Cell.AQUIFER,
    "W": Cell.WASTE,    # aquifer soil holding initial waste
    "P": Cell.EMPTY,    # player spawn point
}


def load_layout(name: str) -> str:
    """Read one of the packaged ascii maps by bare name."""
    path = resources.files("evocommons").joinpath("layouts").joinpath(f"{name}.txt")
    try:
        return path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"unknown packaged layout {name!r}") from None


@dataclass
class Layout:
    """Parsed ascii map: initial cells plus the static geometry."""

    cells: np.ndarray           # int8 Cell codes, shape (rows, cols)
    spawn_points: tuple         # ((x, y), ...) in layout order
    field_spots: np.ndarray     # (k, 2) array of (y, x) apple-capable cells
    aquifer_spots: np.ndarray   # (k, 2) array of (y, x) waste-capable cells

    @property
    def interior_width(self) -> int:
        return self.cells.shape[1] - 2

    @property
    def interior_height(self) -> int:
        return self.cells.shape[0] - 2


def parse_layout(text: str) -> Layout:
    """Parse an ascii map (one character per cell, rectangular)."""
    rows = [r for r in text.splitlines() if r]
    if not rows:
        raise ConfigError("empty layout")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"layout rows have mixed widths {sorted(widths)}")
    h, w = len(rows), widths.pop()
    if h < 3 or w < 3:
        raise ConfigError("layout too small for a border plus interior")
    cells = np.zeros((h, w), dtype=np.int8)
    spawns = []
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch not in _LAYOUT_CHARS:
                raise ConfigError(f"unknown layout character {ch!r} at ({x},{y})")
            cells[y, x] = _LAYOUT_CHARS[ch]
            if ch == "P":
                spawns.append((x, y))
    border = np.concatenate([cells[0], cells[-1], cells[:, 0], cells[:, -1]])
    if not np.all(border == Cell.WALL):
        raise ConfigError("layout border must be solid wall")
    field = np.argwhere((cells == Cell.FIELD) | (cells == Cell.APPLE))
    aquifer = np.argwhere((cells == Cell.AQUIFER) | (cells == Cell.WASTE))
    return Layout(cells=cells, spawn_points=tuple(spawns), field_spots=field, aquifer_spots=aquifer)


@dataclass
class EnvConfig:
    """All knobs of one game instance.

    width/height describe the playable interior (the map minus its wall
    border) and default to whatever the layout provides; setting them merely
    asserts the expectation. harvest_spawn_table[k] is the per-cell respawn
    probability with k nearby apples (clamped at the last entry), and
    cleanup spawn probability decays linearly in the waste level.
    """

    game: GameKind = GameKind.CLEANUP
    layout: str | None = None          # ascii text; None = packaged default for game
    width: int | None = None
    height: int | None = None
    num_players: int = 5
    episode_length: int = 1000
    obs_window: int = 15
    apple_reward: float = 1.0
    tag_cost: float = 1.0
    tag_penalty: float = 50.0
    beam_length: int = 3
    beam_width: int = 1
    harvest_spawn_table: tuple = (0.0, 0.005, 0.02, 0.05)
    harvest_radius: float = 2.0
    cleanup_base_spawn: float = 0.05
    waste_critical: int = 40
    waste_accrual: float = 0.5
    egocentric_moves: bool = True      # False: the four moves are absolute N/S/W/E
    tag_removal_steps: int = 0         # >0: tagged players sit out this many steps

    def layout_text(self) -> str:
        if self.layout is not None:
            return self.layout
        return load_layout(DEFAULT_LAYOUT_NAMES[self.game])

    def validate(self) -> Layout:
        """Check invariants and return the parsed layout. Raises ConfigError."""
        if self.episode_length <= 0:
            raise ConfigError("episode_length must be positive")
        if self.num_players < 1:
            raise ConfigError("num_players must be at least 1")
        if self.obs_window < 1 or self.obs_window % 2 == 0:
            raise ConfigError("obs_window must be odd")
        if self.beam_length < 1 or self.beam_width < 1:
            raise ConfigError("beam dimensions must be at least 1")
        table = tuple(self.harvest_spawn_table)
        if not table or table[0] != 0.0:
            raise ConfigError("harvest_spawn_table[0] must be 0")
        if any(b < a for a, b in zip(table, table[1:])):
            raise ConfigError("harvest_spawn_table must be nondecreasing")
        if not all(0.0 <= p <= 1.0 for p in table):
            raise ConfigError("harvest_spawn_table entries must be probabilities")
        if not 0.0 <= self.cleanup_base_spawn <= 1.0:
            raise ConfigError("cleanup_base_spawn must be a probability")
        if self.waste_critical < 1:
            raise ConfigError("waste_critical must be at least 1")
        if self.waste_accrual < 0:
            raise ConfigError("waste_accrual must be nonnegative")
        if self.tag_removal_steps < 0:
            raise ConfigError("tag_removal_steps must be nonnegative")
        layout = parse_layout(self.layout_text())
        if self.width is not None and layout.interior_width != self.width:
            raise ConfigError(f"layout interior width {layout.interior_width} != configured {self.width}")
        if self.height is not None and layout.interior_height != self.height:
            raise ConfigError(f"layout interior height {layout.interior_height} != configured {self.height}")
        if len(layout.spawn_points) < self.num_players:
            raise ConfigError(
                f"layout has {len(layout.spawn_points)} spawn points for {self.num_players} players")
        if self.game is GameKind.CLEANUP and len(layout.aquifer_spots) < self.waste_critical:
            raise ConfigError(
                f"aquifer holds {len(layout.aquifer_spots)} cells but waste_critical is {self.waste_critical}")
        return layout

    @property
    def action_count(self) -> int:
        return self.game.action_count


@dataclass
class PlayerState:
    id: int
    pos: tuple
    orientation: int                 # 0..3 = N,E,S,W
    last_extrinsic_reward: float = 0.0
    removed_for: int = 0             # steps left off-grid after a tag hit


@dataclass
class EnvState:
    """Full mutable world state of one arena. Single-owner."""

    config: EnvConfig
    t: int
    cells: np.ndarray
    waste_level: int
    waste_pending: float
    players: list
    rng: np.random.Generator
    field_spots: np.ndarray
    aquifer_spots: np.ndarray
    spawn_points: tuple
    _harvest_kernel: np.ndarray | None = field(default=None, repr=False)

    @property
    def done(self) -> bool:
        return self.t >= self.config.episode_length


# Step events; the reward-accounting identity is checkable from these alone.
@dataclass(frozen=True)
class AppleEaten:
    player: int
    pos: tuple


@dataclass(frozen=True)
class TagFired:
    player: int


@dataclass(frozen=True)
class Tagged:
    source: int
    target: int


@dataclass(frozen=True)
class Cleaned:
    player: int
    cells: tuple


@dataclass
class StepOutcome:
    rewards: np.ndarray
    observations: list
    events: list
    done: bool


@dataclass
class Observation:
    """Egocentric window rotated so the observer faces up.

    window holds observation codes (Cell values plus relative-orientation
    player codes); cells beyond the map read as Wall. self_channel marks the
    observer's own cell (always the center).
    """

    window: np.ndarray
    self_channel: np.ndarray
    rgb: np.ndarray | None = None


def harvest_spawn_probability(neighbor_count: int, table) -> float:
    """Respawn probability for one empty field cell with `neighbor_count`
    apples in range; clamped at the table's last entry, zero at zero."""
    if neighbor_count < 0:
        raise UsageError("neighbor_count must be nonnegative")
    table = tuple(table)
    return float(table[min(int(neighbor_count), len(table) - 1)])


def cleanup_spawn_probability(waste_level: float, config: EnvConfig) -> float:
    """Per-cell respawn probability, falling linearly to zero at saturation."""
    frac = 1.0 - float(waste_level) / float(config.waste_critical)
    return config.cleanup_base_spawn * max(0.0, frac)


def _harvest_kernel(radius: float) -> np.ndarray:
    """0/1 disk of cells within Euclidean `radius`, center excluded."""
    r = int(np.floor(radius))
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    kernel = ((dx * dx + dy * dy) <= radius * radius).astype(np.float64)
    kernel[r, r] = 0.0
    return kernel


def reset(config: EnvConfig, seed: int) -> EnvState:
    """Fresh episode state.

    Cleanup starts with no apples and the aquifer saturated (spawn rate
    exactly zero): waste fills layout 'W' cells first, then remaining
    aquifer cells in row-major order, up to waste_critical. Harvest starts
    with the layout's apples. Players take a seed-dependent permutation of
    the spawn points.
    """
    from .rng import stream

    layout = config.validate()
    cells = layout.cells.copy()
    rng = stream(seed, 0)

    if config.game is GameKind.CLEANUP:
        cells[cells == Cell.APPLE] = Cell.FIELD
        marked = [tuple(yx) for yx in np.argwhere(cells == Cell.WASTE)]
        plain = [tuple(yx) for yx in np.argwhere(cells == Cell.AQUIFER)]
        ordered = marked + plain
        for y, x in ordered:
            cells[y, x] = Cell.AQUIFER
        for y, x in ordered[: config.waste_critical]:
            cells[y, x] = Cell.WASTE
        waste_level = config.waste_critical
    else:
        waste_level = int(np.count_nonzero(cells == Cell.WASTE))

    order = rng.permutation(len(layout.spawn_points))
    players = []
    orientations = rng.integers(0, 4, size=config.num_players)
    for pid in range(config.num_players):
        x, y = layout.spawn_points[order[pid]]
        players.append(PlayerState(id=pid, pos=(x, y), orientation=int(orientations[pid])))

    kernel = _harvest_kernel(config.harvest_radius) if config.game is GameKind.HARVEST else None
    return EnvState(
        config=config,
        t=0,
        cells=cells,
        waste_level=waste_level,
        waste_pending=0.0,
        players=players,
        rng=rng,
        field_spots=layout.field_spots,
        aquifer_spots=layout.aquifer_spots,
        spawn_points=layout.spawn_points,
        _harvest_kernel=kernel,
    )


# orientation offset per move action (egocentric frame) / fixed direction
# (absolute frame), indexed by Action value
_EGO_TURN = {Action.MOVE_FORWARD: 0, Action.MOVE_BACKWARD: 2,
             Action.STRAFE_LEFT: -1, Action.STRAFE_RIGHT: 1}
_ABS_DIR = {Action.MOVE_FORWARD: 0, Action.MOVE_BACKWARD: 2,
            Action.STRAFE_LEFT: 3, Action.STRAFE_RIGHT: 1}


def _move_delta(action: Action, orientation: int, egocentric: bool) -> tuple:
    if egocentric:
        return ORIENT_VECS[(orientation + _EGO_TURN[action]) % 4]
    return ORIENT_VECS[_ABS_DIR[action]]


def beam_trace(state: EnvState, player: int, kind: Action):
    """Cells and targets covered by a tag or clean beam.

    The beam is a beam_length x beam_width rectangle starting at the cell in
    front of the player; each parallel ray truncates at its first wall.
    Returns (cells, hit_player_ids, waste_cells); hit players only matter
    for Tag, waste cells only for Clean.
    """
    if kind not in (Action.TAG, Action.CLEAN):
        raise UsageError(f"beam kind must be Tag or Clean, got {kind!r}")
    if kind is Action.CLEAN and state.config.game is not GameKind.CLEANUP:
        raise UsageError("Clean beams exist only in Cleanup")
    if not 0 <= player < len(state.players):
        raise UsageError(f"no player {player}")
    p = state.players[player]
    dx, dy = ORIENT_VECS[p.orientation]
    lx, ly = -dy, dx  # lateral unit vector
    w = state.config.beam_width
    offsets = range(-(w // 2), w - w // 2)
    h_grid, w_grid = state.cells.shape
    cells = []
    for off in offsets:
        for step_i in range(1, state.config.beam_length + 1):
            x = p.pos[0] + dx * step_i + lx * off
            y = p.pos[1] + dy * step_i + ly * off
            if not (0 <= x < w_grid and 0 <= y < h_grid):
                break
            if state.cells[y, x] == Cell.WALL:
                break
            cells.append((x, y))
    cellset = set(cells)
    hit = tuple(
        q.id for q in state.players
        if q.id != player and q.removed_for == 0 and q.pos in cellset
    )
    waste = tuple((x, y) for (x, y) in cells if state.cells[y, x] == Cell.WASTE)
    return tuple(cells), hit, waste


def _respawn_removed(state: EnvState, player: PlayerState, occupied: set) -> None:
    free = [s for s in state.spawn_points if s not in occupied]
    if not free:
        player.removed_for = 1  # retry next step
        return
    player.pos = free[int(state.rng.integers(len(free)))]
    occupied.add(player.pos)


def step(state: EnvState, actions) -> StepOutcome:
    """Advance one tick: movement, beams, apple consumption, waste accrual
    and apple spawning, in that fixed order. Mutates `state`."""
    cfg = state.config
    if state.done:
        raise UsageError("step() on a finished episode")
    if len(actions) != cfg.num_players:
        raise UsageError(f"need {cfg.num_players} actions, got {len(actions)}")
    acts = [Action(int(a)) for a in actions]
    if cfg.game is not GameKind.CLEANUP and Action.CLEAN in acts:
        raise UsageError("Clean is only available in Cleanup")

    rewards = np.zeros(cfg.num_players)
    events = []

    # Phase 1: removal timers, then rotations, then seeded-order movement.
    occupied = {p.pos for p in state.players if p.removed_for == 0}
    for p in state.players:
        if p.removed_for > 0:
            p.removed_for -= 1
            if p.removed_for == 0:
                _respawn_removed(state, p, occupied)
    active = [p for p in state.players if p.removed_for == 0]
    for p in active:
        a = acts[p.id]
        if a is Action.ROTATE_LEFT:
            p.orientation = (p.orientation - 1) % 4
        elif a is Action.ROTATE_RIGHT:
            p.orientation = (p.orientation + 1) % 4
    movers = [p for p in active
              if acts[p.id] in (Action.MOVE_FORWARD, Action.MOVE_BACKWARD,
                                Action.STRAFE_LEFT, Action.STRAFE_RIGHT)]
    for idx in state.rng.permutation(len(movers)):
        p = movers[idx]
        dx, dy = _move_delta(acts[p.id], p.orientation, cfg.egocentric_moves)
        target = (p.pos[0] + dx, p.pos[1] + dy)
        if state.cells[target[1], target[0]] == Cell.WALL or target in occupied:
            continue
        occupied.discard(p.pos)
        occupied.add(target)
        p.pos = target

    # Phase 2: beams. Tag beams are simultaneous (hits computed against the
    # post-movement board before any penalty or removal applies); clean beams
    # resolve in ascending player id so overlapping beams never double-count.
    tag_hits = []
    for p in active:
        a = acts[p.id]
        if a is Action.TAG:
            rewards[p.id] -= cfg.tag_cost
            events.append(TagFired(player=p.id))
            _, hit, _ = beam_trace(state, p.id, Action.TAG)
            tag_hits.extend((p.id, victim) for victim in hit)
    for p in active:
        if acts[p.id] is Action.CLEAN:
            _, _, waste = beam_trace(state, p.id, Action.CLEAN)
            for x, y in waste:
                state.cells[y, x] = Cell.AQUIFER
            state.waste_level -= len(waste)
            events.append(Cleaned(player=p.id, cells=waste))
    for src, victim in tag_hits:
        rewards[victim] -= cfg.tag_penalty
        events.append(Tagged(source=src, target=victim))
    if cfg.tag_removal_steps > 0:
        for _, victim in tag_hits:
            state.players[victim].removed_for = cfg.tag_removal_steps

    # Phase 3: apple consumption by whoever stands on one.
    for p in state.players:
        if p.removed_for == 0 and state.cells[p.pos[1], p.pos[0]] == Cell.APPLE:
            state.cells[p.pos[1], p.pos[0]] = Cell.FIELD
            rewards[p.id] += cfg.apple_reward
            events.append(AppleEaten(player=p.id, pos=p.pos))

    # Phase 4: waste accrual, then apple spawning.
    if cfg.game is GameKind.CLEANUP:
        state.waste_pending = min(state.waste_pending + cfg.waste_accrual,
                                  float(cfg.waste_critical))
        while state.waste_pending >= 1.0 and state.waste_level < cfg.waste_critical:
            empties = [tuple(yx) for yx in state.aquifer_spots
                       if state.cells[yx[0], yx[1]] == Cell.AQUIFER]
            if not empties:
                break
            y, x = empties[int(state.rng.integers(len(empties)))]
            state.cells[y, x] = Cell.WASTE
            state.waste_level += 1
            state.waste_pending -= 1.0
    _spawn_apples(state)

    # Phase 5: clock.
    state.t += 1
    for p in state.players:
        p.last_extrinsic_reward = float(rewards[p.id])

    observations = observe_all(state)
    return StepOutcome(rewards=rewards, observations=observations, events=events,
                       done=state.done)


def _spawn_apples(state: EnvState) -> None:
    """Probabilistic respawn on empty field soil; never on apples, occupied
    cells, or non-field cells. One fixed-size draw per step keeps the RNG
    stream's consumption independent of board contents."""
    cfg = state.config
    spots = state.field_spots
    if len(spots) == 0:
        return
    draws = state.rng.random(len(spots))
    soil = state.cells[spots[:, 0], spots[:, 1]] == Cell.FIELD
    occupied = {p.pos for p in state.players if p.removed_for == 0}
    if cfg.game is GameKind.CLEANUP:
        probs = np.full(len(spots), cleanup_spawn_probability(state.waste_level, cfg))
    else:
        apple_mask = (state.cells == Cell.APPLE).astype(np.float64)
        counts = convolve2d(apple_mask, state._harvest_kernel, mode="same", boundary="fill")
        table = np.asarray(cfg.harvest_spawn_table)
        idx = np.minimum(counts[spots[:, 0], spots[:, 1]].astype(np.int64), len(table) - 1)
        probs = table[idx]
    spawn = soil & (draws < probs)
    for y, x in spots[spawn]:
        if (x, y) not in occupied:
            state.cells[y, x] = Cell.APPLE


def _composite(state: EnvState) -> np.ndarray:
    """Grid of observation codes: terrain plus players (absolute orientation)."""
    comp = state.cells.astype(np.int8).copy()
    for p in state.players:
        if p.removed_for == 0:
            comp[p.pos[1], p.pos[0]] = PLAYER_CODE_BASE + p.orientation
    return comp


# Per-observer-orientation code remap: player codes become relative to the
# observer, terrain codes pass through.
_RELATIVE_CODE_LUT = np.empty((4, NUM_OBS_CODES), dtype=np.int8)
for _o in range(4):
    _RELATIVE_CODE_LUT[_o] = np.arange(NUM_OBS_CODES, dtype=np.int8)
    for _c in range(4):
        _RELATIVE_CODE_LUT[_o, PLAYER_CODE_BASE + _c] = PLAYER_CODE_BASE + (_c - _o) % 4
del _o, _c


def _window(padded: np.ndarray, pos: tuple, observer_orientation: int, pad: int) -> np.ndarray:
    x, y = pos
    size = 2 * pad + 1
    win = padded[y: y + size, x: x + size]
    win = np.rot90(win, k=observer_orientation)
    return _RELATIVE_CODE_LUT[observer_orientation][win]


def _padded_composite(state: EnvState, pad: int) -> np.ndarray:
    h, w = state.cells.shape
    padded = np.full((h + 2 * pad, w + 2 * pad), int(Cell.WALL), dtype=np.int8)
    padded[pad: pad + h, pad: pad + w] = _composite(state)
    return padded


def observe(state: EnvState, player: int, rgb: bool = False) -> Observation:
    """Egocentric window for one player; a pure function of the state."""
    if not 0 <= player < len(state.players):
        raise UsageError(f"no player {player}")
    pad = state.config.obs_window // 2
    return _observation_for(state, _padded_composite(state, pad), player, pad, rgb)


def observe_all(state: EnvState, rgb: bool = False) -> list:
    """Windows for every player, sharing one composite grid."""
    pad = state.config.obs_window // 2
    padded = _padded_composite(state, pad)
    return [_observation_for(state, padded, pid, pad, rgb)
            for pid in range(state.config.num_players)]


def _observation_for(state: EnvState, padded: np.ndarray, player: int, pad: int,
                     rgb: bool) -> Observation:
    p = state.players[player]
    size = 2 * pad + 1
    if p.removed_for > 0:
        win = np.full((size, size), int(Cell.WALL), dtype=np.int8)
    else:
        win = _window(padded, p.pos, p.orientation, pad)
    self_channel = np.zeros((size, size), dtype=bool)
    self_channel[pad, pad] = True
    obs = Observation(window=win, self_channel=self_channel)
    if rgb:
        obs.rgb = render_codes_rgb(win)
    return obs


# --- rendering helpers (pure views, used by replay and the demos) ---

PALETTE = np.array([
    [40, 40, 40],      # EMPTY
    [120, 120, 120],   # WALL
    [40, 200, 60],     # APPLE
    [130, 90, 30],     # WASTE
    [60, 80, 45],      # FIELD soil
    [70, 110, 160],    # AQUIFER soil
    [230, 60, 60],     # player facing up / N
    [230, 140, 40],    # player facing right / E
    [200, 60, 200],    # player facing down / S
    [240, 220, 70],    # player facing left / W
], dtype=np.uint8)

_ASCII = {Cell.EMPTY: ".", Cell.WALL: "#", Cell.APPLE: "A", Cell.WASTE: "w",
          Cell.FIELD: ",", Cell.AQUIFER: "~"}


def render_codes_rgb(codes: np.ndarray, scale: int = 1) -> np.ndarray:
    img = PALETTE[np.clip(codes, 0, len(PALETTE) - 1)]
    if scale > 1:
        img = np.kron(img, np.ones((scale, scale, 1), dtype=np.uint8))
    return img


def render_rgb(state: EnvState, scale: int = 8) -> np.ndarray:
    return render_codes_rgb(_composite(state), scale=scale)


def render_ascii(state: EnvState) -> str:
    grid = [[_ASCII[Cell(int(c))] for c in row] for row in state.cells]
    for p in state.players:
        if p.removed_for == 0:
            grid[p.pos[1]][p.pos[0]] = str(p.id % 10)
    return "\n".join("".join(row) for row in grid)
