"""evocommons: evolving intrinsic social-preference rewards in
commons-dilemma grid games.

The package splits into the two games (gridworld), the intrinsic reward
machinery (social_reward), a compact actor-critic learner (learner),
two-population selection (evolution), group formation (matchmaking),
social-outcome metrics (metrics), and the experiment harness with replay
and reporting (config, harness, replay, reports, cli).
"""

from .config import ExperimentConfig, LearnerConfig, mini_cleanup_config, mini_harvest_config
from .errors import ConfigError, IntegrityError, NumericError, UsageError
from .evolution import (
    EvoConfig,
    GroupAssignment,
    PolicyIndividual,
    RewardIndividual,
    RewardMode,
    assign_fitness,
    exploit_explore,
    mutate,
    sample_players,
    smooth_fitness,
)
from .gridworld import (
    Action,
    EnvConfig,
    EnvState,
    GameKind,
    Observation,
    StepOutcome,
    beam_trace,
    cleanup_spawn_probability,
    harvest_spawn_probability,
    load_layout,
    observe,
    reset,
    step,
)
from .harness import run_experiment
from .learner import Hyperparams, OptState, PolicyParams, Segment, act, compute_targets, update
from .matchmaking import (
    CoopRecord,
    Matchmaking,
    assortative_groups,
    coop_score_cleanup,
    coop_score_harvest,
    random_groups,
)
from .metrics import EpisodeStats, collective_return, equality, gini, sustainability, tagging_rate
from .replay import replay_episode, validate_run
from .reports import plot_run, report_weights
from .social_reward import (
    DecayState,
    FeatureMode,
    RewardNetParams,
    build_features,
    intrinsic_reward,
    total_reward,
    update_decay,
)

__version__ = "0.1.0"
