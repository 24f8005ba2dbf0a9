"""Pedestrian crossing behavior model.

The pedestrian's commanded speed is a sigmoid gap-acceptance response to the
time-to-collision the vehicle currently offers: a generous gap saturates the
speed at the free crossing speed, a closing gap drives it to zero.  On top of
the speed model sits the crossing-intention signal, which the controller can
discount over time while the pedestrian stands still near the roadway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .scenario import (
    ControllerParams,
    JointState,
    ScenarioGeometry,
    ZoneLabel,
    classify_zone,
    is_veh_passed,
)

__all__ = [
    "crossing_gain",
    "model_ttc",
    "ped_next_velocity",
    "IntentionSignal",
    "discount_intention",
    "IntentionTracker",
]

# Base of the exponential intention discount.  Raising it to k_discount *
# elapsed-seconds gives the fraction of the onset intention still credited.
DISCOUNT_BASE = 0.9


def crossing_gain(ttc: float, c: float) -> float:
    """Sigmoid gap-acceptance gain in (0, 1).

    gain = 1 / (1 + exp(-(ttc - c))), evaluated in the numerically stable
    branch so large |ttc| saturates to 0 or 1 instead of overflowing.  ``c``
    shifts the midpoint: gain(c, c) == 0.5 exactly.
    """
    a = ttc - c
    if a >= 0.0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


def model_ttc(state: JointState, geometry: ScenarioGeometry, params: ControllerParams) -> float:
    """Time advantage the vehicle offers the pedestrian at the conflict point.

    Vehicle time-to-conflict minus pedestrian time-to-conflict, both along
    their own axes.  The vehicle speed is floored at v_eps so a (near-)stopped
    vehicle reads as an arbitrarily generous gap; the result is signed and
    negative once the vehicle would beat the pedestrian to the conflict.
    """
    t_veh = (geometry.conflict_x - state.x_veh) / max(state.v_veh, params.v_eps)
    t_ped = (geometry.conflict_y - state.y_ped) / params.v_ped_ref
    return t_veh - t_ped


def ped_next_velocity(state: JointState, geometry: ScenarioGeometry, params: ControllerParams) -> float:
    """Pedestrian speed commanded by the gap-acceptance model for the next step."""
    return crossing_gain(model_ttc(state, geometry, params), params.c) * params.v_ped_ref


@dataclass(frozen=True)
class IntentionSignal:
    """Crossing intention latched at interaction onset.

    ``value`` is the intention observed at onset time ``t0`` (vehicle within
    sensing range while the pedestrian is at the roadside), the quantity the
    standstill discount decays.
    """

    value: float    # intention in [0, 1] at onset
    t0: float       # interaction onset time [s]

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"IntentionSignal.value must be in [0, 1], got {self.value}")
        if not math.isfinite(self.t0):
            raise ValueError(f"IntentionSignal.t0 must be finite, got {self.t0!r}")


def discount_intention(signal: IntentionSignal, k_discount: float, t: float) -> float:
    """Onset intention decayed by standing time: value * 0.9^(k_discount * (t - t0)).

    Raises ValueError for t before the onset.  k_discount = 0 disables the
    decay; larger values resolve a standing pedestrian's stale intention
    faster.
    """
    if t < signal.t0:
        raise ValueError(f"discount_intention: t={t} precedes onset t0={signal.t0}")
    if k_discount < 0:
        raise ValueError(f"discount_intention: k_discount must be >= 0, got {k_discount}")
    return signal.value * DISCOUNT_BASE ** (k_discount * (t - signal.t0))


class IntentionTracker:
    """Tracks interaction onset and applies the standstill discount.

    Feed it the raw intention each controller tick via :meth:`effective`.
    Until an interaction begins (pedestrian at the roadside while the vehicle
    is within sensing range, not yet passed), the raw signal passes through.
    After onset, the raw signal still passes through except while the
    pedestrian stands still in the safe or near zone, where the intention
    recorded at onset is decayed instead.
    """

    def __init__(self) -> None:
        self.onset: Optional[IntentionSignal] = None

    def reset(self) -> None:
        self.onset = None

    def observe(self, state: JointState, raw_intention: float,
                geometry: ScenarioGeometry, params: ControllerParams) -> None:
        """Latch the onset signal the first time the interaction condition holds."""
        if self.onset is not None:
            return
        zone = classify_zone(state.y_ped, geometry)
        at_roadside = zone in (ZoneLabel.SAFE, ZoneLabel.NEAR, ZoneLabel.CROSSING)
        in_range = (geometry.conflict_x - state.x_veh) <= geometry.sensing_range
        if at_roadside and in_range and not is_veh_passed(state, geometry):
            self.onset = IntentionSignal(value=float(raw_intention), t0=state.t)

    def is_discounting(self, state: JointState, geometry: ScenarioGeometry,
                       params: ControllerParams) -> bool:
        """True while the standstill discount condition holds."""
        if self.onset is None:
            return False
        zone = classify_zone(state.y_ped, geometry)
        standing = abs(state.v_ped) < params.standstill_speed
        return standing and zone in (ZoneLabel.SAFE, ZoneLabel.NEAR)

    def effective(self, state: JointState, raw_intention: float,
                  geometry: ScenarioGeometry, params: ControllerParams) -> float:
        """Effective intention for this tick (discounted or raw pass-through)."""
        self.observe(state, raw_intention, geometry, params)
        if self.is_discounting(state, geometry, params):
            return discount_intention(self.onset, params.k_discount, state.t)
        return float(raw_intention)
