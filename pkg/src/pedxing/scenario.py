"""Core scenario types shared by every layer: joint state, road geometry,
zone classification and the controller parameter bundle.

Coordinate convention: the conflict point sits at (conflict_x, conflict_y).
The vehicle drives along +x on the lane y = conflict_y and approaches from
x < conflict_x; the pedestrian walks along +y on the path x = conflict_x and
approaches from y < conflict_y.  With the default geometry the conflict point
is the origin, so raw coordinates read directly as signed distances to it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ZoneLabel",
    "JointState",
    "ScenarioGeometry",
    "ControllerParams",
    "THETA_FIELDS",
    "classify_zone",
    "is_ped_passed",
    "is_veh_passed",
    "separation",
]


class ZoneLabel(enum.Enum):
    """Pedestrian-axis zone bands, ordered by distance from the roadway."""

    APPROACH = "approach"
    SAFE = "safe"
    NEAR = "near"
    CROSSING = "crossing"
    PASSED = "passed"


@dataclass(frozen=True)
class JointState:
    """Joint vehicle-pedestrian state at a simulation instant.

    The state vector ordering used throughout is
    [x_veh, v_veh, y_ped, v_ped].  ``v_veh >= 0`` is a physical-plant
    invariant enforced by the simulator clamp and the controller speed
    constraint, not by this constructor: prediction math is allowed to pass
    through sign-violating intermediate states.
    """

    t: float        # episode time [s]
    x_veh: float    # vehicle position along the lane [m]
    v_veh: float    # vehicle speed [m/s]
    y_ped: float    # pedestrian position along the crossing path [m]
    v_ped: float    # pedestrian speed [m/s]

    def __post_init__(self) -> None:
        for name in ("t", "x_veh", "v_veh", "y_ped", "v_ped"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"JointState.{name} must be finite, got {getattr(self, name)!r}")

    def as_vector(self) -> np.ndarray:
        """State as the 4-vector [x_veh, v_veh, y_ped, v_ped]."""
        return np.array([self.x_veh, self.v_veh, self.y_ped, self.v_ped], dtype=float)

    @classmethod
    def from_vector(cls, t: float, vec: np.ndarray) -> "JointState":
        x_veh, v_veh, y_ped, v_ped = (float(v) for v in vec)
        return cls(t=t, x_veh=x_veh, v_veh=v_veh, y_ped=y_ped, v_ped=v_ped)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Road geometry and the pedestrian-axis zone bands.

    Zone intervals are half-open [lo, hi) on the pedestrian axis and must be
    ordered approach < safe < near < crossing < passed with no overlap.
    """

    conflict_x: float = 0.0                 # conflict point, lane axis [m]
    conflict_y: float = 0.0                 # conflict point, crossing axis [m]
    safe_zone: tuple[float, float] = (-7.0, -4.0)
    near_zone: tuple[float, float] = (-4.0, -2.0)
    crossing_zone: tuple[float, float] = (-2.0, 2.0)
    veh_passed_clearance: float = 2.0       # lane distance past conflict that counts as passed [m]
    sensing_range: float = 50.0             # vehicle-to-conflict range that starts an interaction [m]

    def __post_init__(self) -> None:
        for name in ("safe_zone", "near_zone", "crossing_zone"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"ScenarioGeometry.{name}: lower bound {lo} must be < upper bound {hi}")
        if not self.safe_zone[1] <= self.near_zone[0]:
            raise ValueError("ScenarioGeometry: safe_zone must end at or before near_zone starts")
        if not self.near_zone[1] <= self.crossing_zone[0]:
            raise ValueError("ScenarioGeometry: near_zone must end at or before crossing_zone starts")
        if not self.crossing_zone[0] <= self.conflict_y < self.crossing_zone[1]:
            raise ValueError("ScenarioGeometry: conflict point must lie inside the crossing zone")
        if self.veh_passed_clearance < 0:
            raise ValueError("ScenarioGeometry.veh_passed_clearance must be >= 0")
        if self.sensing_range <= 0:
            raise ValueError("ScenarioGeometry.sensing_range must be > 0")


def classify_zone(y_ped: float, geometry: ScenarioGeometry) -> ZoneLabel:
    """Classify a pedestrian-axis position into its zone band.

    Total over all finite y: positions beyond the far curb are PASSED,
    positions before the safe zone are APPROACH, and any configured gap
    between bands is absorbed by the next band toward the roadway.
    """
    if not math.isfinite(y_ped):
        raise ValueError(f"y_ped must be finite, got {y_ped!r}")
    if y_ped >= geometry.crossing_zone[1]:
        return ZoneLabel.PASSED
    if y_ped >= geometry.crossing_zone[0]:
        return ZoneLabel.CROSSING
    if y_ped >= geometry.near_zone[0]:
        return ZoneLabel.NEAR
    if y_ped >= geometry.safe_zone[0]:
        return ZoneLabel.SAFE
    return ZoneLabel.APPROACH


def is_ped_passed(state: JointState, geometry: ScenarioGeometry) -> bool:
    """True once the pedestrian is beyond the far edge of the crossing zone."""
    return state.y_ped >= geometry.crossing_zone[1]


def is_veh_passed(state: JointState, geometry: ScenarioGeometry) -> bool:
    """True once the vehicle is past the conflict point by the clearance margin."""
    return state.x_veh > geometry.conflict_x + geometry.veh_passed_clearance


def separation(state: JointState, geometry: ScenarioGeometry) -> float:
    """Euclidean vehicle-pedestrian distance.

    The vehicle sits at (x_veh, conflict_y) and the pedestrian at
    (conflict_x, y_ped), so this doubles as the distance of the pair from the
    conflict point used by the controller's minimum-separation constraint.
    """
    return math.hypot(state.x_veh - geometry.conflict_x, state.y_ped - geometry.conflict_y)


# Ordering of the tunable parameter vector exposed to the tuner.
THETA_FIELDS: tuple[str, ...] = (
    "w_safe",
    "w_com",
    "w_ref_ped",
    "w_ref_veh",
    "d_min",
    "k_discount",
    "v_veh_max",
    "a_min",
    "a_max",
)


@dataclass
class ControllerParams:
    """Controller parameter bundle.

    The first nine fields form the tunable vector theta (see THETA_FIELDS);
    the rest are operating constants shared by the controllers, the
    prediction model and the baselines.
    """

    # tunable theta
    w_safe: float = 2000.0          # safety cost weight
    w_com: float = 0.2              # comfort (input effort) weight
    w_ref_ped: float = 0.5          # pedestrian progress weight
    w_ref_veh: float = 1.0          # vehicle speed tracking weight
    d_min: float = 5.0              # minimum separation from the conflict point [m]
    k_discount: float = 1.0         # intention discount rate (per second)
    v_veh_max: float = 13.9         # speed limit [m/s]
    a_min: float = -4.0             # strongest braking [m/s^2]
    a_max: float = 2.0              # strongest acceleration [m/s^2]

    # prediction model
    c: float = 4.0                  # crossing-gain sigmoid midpoint offset [s]
    v_ped_ref: float = 1.4          # pedestrian free crossing speed [m/s]
    v_eps: float = 0.05             # vehicle speed floor in TTC divisions [m/s]
    standstill_speed: float = 0.05  # |v_ped| below this counts as standing [m/s]

    # horizon and references
    n_horizon: int = 20             # prediction steps N
    dt: float = 0.2                 # controller tick / prediction step [s]
    v_veh_ref: float = 8.33         # vehicle reference speed [m/s]

    # baseline behavior
    t_wait: float = 6.0             # standstill wait before resuming [s]
    ttc_threshold: float = 4.0      # baseline TTC trigger [s]
    intention_threshold: float = 0.5
    slow_speed: float = 3.0         # cautious resume speed [m/s]
    k_p_speed: float = 1.0          # velocity tracking gain [1/s]
    comfort_decel: float = 2.5      # comfortable braking magnitude [m/s^2]
    stop_buffer: float = 6.0        # target standstill distance before the conflict [m]

    # solver knobs
    prediction_mode: str = "rollout"   # "rollout" | "frozen_z"
    ref_cost_literal: bool = False     # use the raw quadratic form instead of deviations
    safety_floor: float = 1e-6         # floor for the safety cost denominator

    def __post_init__(self) -> None:
        if not self.a_min < 0 < self.a_max:
            raise ValueError(f"ControllerParams: need a_min < 0 < a_max, got a_min={self.a_min}, a_max={self.a_max}")
        if self.v_veh_max <= 0:
            raise ValueError(f"ControllerParams.v_veh_max must be > 0, got {self.v_veh_max}")
        if self.v_ped_ref <= 0:
            raise ValueError(f"ControllerParams.v_ped_ref must be > 0, got {self.v_ped_ref}")
        if self.v_eps <= 0:
            raise ValueError(f"ControllerParams.v_eps must be > 0, got {self.v_eps}")
        if self.n_horizon < 1:
            raise ValueError(f"ControllerParams.n_horizon must be >= 1, got {self.n_horizon}")
        if self.dt <= 0:
            raise ValueError(f"ControllerParams.dt must be > 0, got {self.dt}")
        if self.d_min < 0:
            raise ValueError(f"ControllerParams.d_min must be >= 0, got {self.d_min}")
        if self.k_discount < 0:
            raise ValueError(f"ControllerParams.k_discount must be >= 0, got {self.k_discount}")
        if not 0.0 <= self.intention_threshold <= 1.0:
            raise ValueError(f"ControllerParams.intention_threshold must be in [0, 1], got {self.intention_threshold}")
        if min(self.w_safe, self.w_com, self.w_ref_ped, self.w_ref_veh) < 0:
            raise ValueError("ControllerParams: cost weights must be >= 0")
        if self.prediction_mode not in ("rollout", "frozen_z"):
            raise ValueError(f"ControllerParams.prediction_mode must be 'rollout' or 'frozen_z', got {self.prediction_mode!r}")
        if self.comfort_decel <= 0:
            raise ValueError(f"ControllerParams.comfort_decel must be > 0, got {self.comfort_decel}")
        if self.safety_floor <= 0:
            raise ValueError(f"ControllerParams.safety_floor must be > 0, got {self.safety_floor}")

    def as_theta(self) -> np.ndarray:
        """The tunable parameter vector, ordered as THETA_FIELDS."""
        return np.array([getattr(self, name) for name in THETA_FIELDS], dtype=float)

    def with_theta(self, theta: np.ndarray) -> "ControllerParams":
        """A copy with the tunable vector replaced (validates on construction)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(THETA_FIELDS),):
            raise ValueError(f"theta must have shape ({len(THETA_FIELDS)},), got {theta.shape}")
        return replace(self, **{name: float(v) for name, v in zip(THETA_FIELDS, theta)})
