"""Experiment configuration and its flat key-value file format.

Config files are plain text: one `section.key = value` per line, `#`
comments, blank lines ignored. Every training constant has a named key, so
a file fully determines a run. The resolved config written into a run
directory embeds the layout text verbatim (JSON-quoted), making the run
self-contained for replay.
"""

from __future__ import annotations

import enum
import json
import os
import types
import typing
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .evolution import EvoConfig, RewardMode
from .gridworld import EnvConfig, GameKind, load_layout
from .matchmaking import Matchmaking
from .social_reward import FeatureMode

OUTPUT_ROOT_ENV_VAR = "EVOCOMMONS_OUTPUT_ROOT"


@dataclass
class LearnerConfig:
    """Architecture and fixed optimization constants for every learner."""

    encoder_hidden: int = 64
    unroll_length: int = 100
    learning_rate_init: float = 4e-4
    entropy_cost_low: float = 2e-4
    entropy_cost_high: float = 0.01
    baseline_cost: float = 0.25
    discount: float = 0.99

    def validate(self) -> None:
        if self.encoder_hidden < 1:
            raise ConfigError("encoder_hidden must be positive")
        if not 1 <= self.unroll_length <= 100:
            raise ConfigError("unroll_length must lie in [1, 100]")
        if self.learning_rate_init <= 0:
            raise ConfigError("learning_rate_init must be positive")
        if not 0 < self.entropy_cost_low <= self.entropy_cost_high:
            raise ConfigError("entropy cost range must satisfy 0 < low <= high")
        if not 0 < self.discount <= 1:
            raise ConfigError("discount must lie in (0, 1]")


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    evo: EvoConfig = field(default_factory=EvoConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    feature_mode: FeatureMode = FeatureMode.RETROSPECTIVE
    feature_decay: float = 0.975
    matchmaking: Matchmaking = Matchmaking.RANDOM
    arenas: int = 1
    total_episodes: int = 10
    evolve_every: int = 10
    checkpoint_every: int = 1000
    seed: int = 0
    output_dir: str | None = None

    def validate(self) -> None:
        self.env.validate()
        self.evo.validate()
        self.learner.validate()
        if not 0.0 <= self.feature_decay < 1.0:
            raise ConfigError("feature_decay must lie in [0, 1)")
        if self.arenas < 1:
            raise ConfigError("arenas must be at least 1")
        if self.total_episodes < 0:
            raise ConfigError("total_episodes must be nonnegative")
        if self.evolve_every < 1 or self.checkpoint_every < 1:
            raise ConfigError("evolve_every and checkpoint_every must be positive")
        if self.evo.population_size < self.env.num_players:
            raise ConfigError("population smaller than the player group")
        if (self.matchmaking is Matchmaking.ASSORTATIVE
                and self.evo.reward_mode is RewardMode.SHARED):
            raise ConfigError(
                "assortative matchmaking and a shared reward network are separate "
                "schemes; pick one (use reward_mode individual or none)")

    def resolved_output_dir(self) -> str:
        if self.output_dir is None:
            raise ConfigError("no output_dir configured (set it or pass --output)")
        root = os.environ.get(OUTPUT_ROOT_ENV_VAR)
        if root and not os.path.isabs(self.output_dir):
            return os.path.join(root, self.output_dir)
        return self.output_dir


# --- file format ---------------------------------------------------------

_SECTIONS = {"env": EnvConfig, "evo": EvoConfig, "learner": LearnerConfig}


def _field_types(dc_type) -> dict:
    return typing.get_type_hints(dc_type)


def _parse_value(raw: str, ftype, key: str):
    if typing.get_origin(ftype) in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(ftype) if a is not type(None)]
        if raw.strip().lower() == "none":
            return None
        ftype = args[0]
    if isinstance(ftype, type) and issubclass(ftype, enum.Enum):
        try:
            return ftype(raw.strip().lower())
        except ValueError:
            options = ", ".join(m.value for m in ftype)
            raise ConfigError(f"{key}: expected one of {options}, got {raw!r}") from None
    if ftype is bool:
        low = raw.strip().lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {raw!r}")
    if ftype is int:
        try:
            as_float = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
        if as_float != int(as_float):
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
        return int(as_float)
    if ftype is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if ftype is tuple:
        try:
            return tuple(float(x) for x in raw.split(","))
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated numbers, got {raw!r}") from None
    if ftype is str:
        raw = raw.strip()
        if raw.startswith('"'):
            return json.loads(raw)
        return raw
    raise ConfigError(f"{key}: unsupported config field type {ftype!r}")


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if isinstance(value, str):
        # quote anything that would not survive the flat format verbatim
        if "\n" in value or value != value.strip() or value.startswith('"'):
            return json.dumps(value)
        return value
    raise ConfigError(f"cannot format config value {value!r}")


def _resolve_layout(raw: str | None) -> str | None:
    """A layout value may be inline text (quoted), a packaged map name, or a
    file path."""
    if raw is None or "\n" in raw:
        return raw
    if os.path.sep in raw or raw.endswith(".txt"):
        try:
            with open(raw) as fh:
                return fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read layout file {raw!r}: {exc}") from None
    return load_layout(raw)


def parse_config_text(text: str) -> ExperimentConfig:
    """Build an ExperimentConfig from flat key-value text. Unknown keys and
    malformed lines are configuration errors."""
    config = ExperimentConfig()
    top_types = _field_types(ExperimentConfig)
    section_types = {name: _field_types(dc) for name, dc in _SECTIONS.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.split("#", 1)[0].strip() if not raw.strip().startswith('"') else raw.strip()
        if "." in key:
            section, _, name = key.partition(".")
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
            types = section_types[section]
            if name not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            value = _parse_value(raw, types[name], key)
            setattr(getattr(config, section), name, value)
        else:
            if key not in top_types or key in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            value = _parse_value(raw, top_types[key], key)
            setattr(config, key, value)
    config.env.layout = _resolve_layout(config.env.layout)
    return config


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return parse_config_text(text)


def config_to_text(config: ExperimentConfig) -> str:
    """Canonical resolved form: every key explicit, layout embedded, keys in
    a fixed order so identical configs serialize identically."""
    lines = ["# evocommons experiment config v1"]
    for f in fields(ExperimentConfig):
        if f.name in _SECTIONS or f.name == "output_dir":
            continue
        lines.append(f"{f.name} = {_format_value(getattr(config, f.name))}")
    if config.output_dir is not None:
        lines.append(f"output_dir = {_format_value(config.output_dir)}")
    for section in _SECTIONS:
        obj = getattr(config, section)
        for f in fields(type(obj)):
            value = getattr(obj, f.name)
            if section == "env" and f.name == "layout":
                value = config.env.layout_text()
            lines.append(f"{section}.{f.name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


# --- ready-made desk-scale configurations --------------------------------

def mini_harvest_config(**overrides) -> ExperimentConfig:
    """12x8 Harvest, 3 players, 200-step episodes, population 16: the
    desk-scale workhorse used by the tests and demos."""
    config = ExperimentConfig(
        env=EnvConfig(
            game=GameKind.HARVEST,
            layout=load_layout("harvest_mini"),
            num_players=3,
            episode_length=200,
            obs_window=7,
        ),
        evo=EvoConfig(
            population_size=16,
            burn_in_steps=50_000,
            reward_mode=RewardMode.SHARED,
        ),
        learner=LearnerConfig(unroll_length=50),
        arenas=1,
        total_episodes=40,
        evolve_every=10,
    )
    return _apply_overrides(config, overrides)


def mini_cleanup_config(**overrides) -> ExperimentConfig:
    """12x8 Cleanup twin of mini_harvest_config."""
    config = ExperimentConfig(
        env=EnvConfig(
            game=GameKind.CLEANUP,
            layout=load_layout("cleanup_mini"),
            num_players=3,
            episode_length=200,
            obs_window=7,
            waste_critical=10,
            waste_accrual=0.25,
            cleanup_base_spawn=0.05,
        ),
        evo=EvoConfig(
            population_size=16,
            burn_in_steps=50_000,
            reward_mode=RewardMode.SHARED,
        ),
        learner=LearnerConfig(unroll_length=50),
        arenas=1,
        total_episodes=40,
        evolve_every=10,
    )
    return _apply_overrides(config, overrides)


def _apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply dotted or top-level field overrides, e.g. seed=3 or
    evo__reward_mode=RewardMode.NONE (double underscore for sections)."""
    for key, value in overrides.items():
        if "__" in key:
            section, _, name = key.partition("__")
            target = getattr(config, section)
            if not hasattr(target, name):
                raise ConfigError(f"unknown override {key!r}")
            setattr(target, name, value)
        else:
            if not hasattr(config, key):
                raise ConfigError(f"unknown override {key!r}")
            setattr(config, key, value)
    return config
