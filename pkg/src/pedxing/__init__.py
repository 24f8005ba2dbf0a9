"""Vehicle-pedestrian crossing negotiation: simulator, controllers, metrics.

The package simulates an automated vehicle approaching an unsignalized
crosswalk while a pedestrian decides whether to cross, and provides three
controllers for the vehicle: an interaction-aware model predictive
controller that plans over a joint vehicle-pedestrian model, a rule-based
yielding policy, and a cautious stop-and-wait baseline.  Around the core
sit scripted and interactive pedestrian behaviors, surrogate safety
metrics with rank-based statistics, a parameter tuner, a CLI, and a
websocket service for live sessions.

Interactive/service and tuning entry points live in ``pedxing.service``,
``pedxing.tuning`` and ``pedxing.cli`` and are imported on demand.
"""

from .baselines import CautiousController, Decision, RuleBasedController
from .config import Config, ConfigError, config_hash, load_config, with_controller_overrides
from .dynamics import BatchOperators, build_batch, predict, rollout, step, system_matrices
from .metrics import (
    EPISODE_METRICS,
    MetricsConfig,
    build_report,
    dst_metric,
    episode_averages,
    format_table,
    iqr_filter,
    kruskal_wallis,
    mann_whitney,
    ttc_metric,
)
from .mpc import Infeasible, MpcController, MpcProblem, MpcSolution, apply_intention, eval_cost
from .pedestrian import (
    IntentionSignal,
    IntentionTracker,
    crossing_gain,
    discount_intention,
    model_ttc,
    ped_next_velocity,
)
from .scenario import (
    THETA_FIELDS,
    ControllerParams,
    JointState,
    ScenarioGeometry,
    ZoneLabel,
    classify_zone,
    is_ped_passed,
    is_veh_passed,
    separation,
)
from .simulate import (
    CONTROLLER_NAMES,
    SCENARIO_KINDS,
    BatchItem,
    ScenarioScript,
    ScriptedPedestrian,
    SimConfig,
    make_controller,
    plant_step,
    run_batch,
    run_episode,
)
from .trace import SCHEMA_VERSION, EpisodeTrace, Outcome, TickRecord, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # scenario
    "ZoneLabel", "JointState", "ScenarioGeometry", "ControllerParams",
    "THETA_FIELDS", "classify_zone", "is_ped_passed", "is_veh_passed", "separation",
    # pedestrian model
    "crossing_gain", "model_ttc", "ped_next_velocity",
    "IntentionSignal", "IntentionTracker", "discount_intention",
    # dynamics
    "system_matrices", "step", "BatchOperators", "build_batch", "predict", "rollout",
    # controllers
    "Decision", "RuleBasedController", "CautiousController",
    "MpcController", "MpcProblem", "MpcSolution", "Infeasible",
    "apply_intention", "eval_cost",
    # simulation
    "SCENARIO_KINDS", "CONTROLLER_NAMES", "ScenarioScript", "ScriptedPedestrian",
    "SimConfig", "plant_step", "make_controller", "run_episode",
    "BatchItem", "run_batch",
    # traces
    "SCHEMA_VERSION", "Outcome", "TickRecord", "EpisodeTrace",
    "read_trace", "write_trace",
    # metrics and stats
    "MetricsConfig", "ttc_metric", "dst_metric", "episode_averages",
    "iqr_filter", "kruskal_wallis", "mann_whitney",
    "EPISODE_METRICS", "build_report", "format_table",
    # configuration
    "Config", "ConfigError", "load_config", "config_hash", "with_controller_overrides",
]
