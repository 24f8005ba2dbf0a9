"""Baseline crossing controllers: plain velocity tracking, a cautious
stop-and-wait policy that ignores intention, and an intention-gated rule set.

All controllers expose decide(state, intention) -> Decision and reset();
commands are accelerations already clamped to [a_min, a_max].
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .metrics import MetricsConfig, ttc_metric
from .scenario import (
    ControllerParams,
    JointState,
    ScenarioGeometry,
    ZoneLabel,
    classify_zone,
    is_ped_passed,
    is_veh_passed,
)

__all__ = [
    "Decision",
    "velocity_tracking",
    "stop_command",
    "CautiousController",
    "RuleBasedController",
]


@dataclass(frozen=True)
class Decision:
    """One controller tick: the acceleration command plus diagnostics."""

    u: float
    intention_eff: float
    zone: str
    diag: dict = field(default_factory=dict)


def velocity_tracking(state: JointState, params: ControllerParams,
                      v_target: float | None = None) -> float:
    """Proportional speed tracking clamped to the input bounds."""
    target = params.v_veh_ref if v_target is None else v_target
    u = params.k_p_speed * (target - state.v_veh)
    return min(max(u, params.a_min), params.a_max)


def stop_command(state: JointState, geometry: ScenarioGeometry,
                 params: ControllerParams) -> float:
    """Brake toward a standstill ``stop_buffer`` meters before the conflict.

    Uses the comfortable deceleration unless the remaining distance demands
    more, escalating up to a_min.  Holds at zero once stopped.
    """
    if state.v_veh <= 1e-9:
        return 0.0
    remaining = (geometry.conflict_x - params.stop_buffer) - state.x_veh
    if remaining <= 0.0:
        return params.a_min
    # deceleration that stops exactly at the target point
    a_req = -state.v_veh ** 2 / (2.0 * remaining)
    u = max(min(-params.comfort_decel, a_req), params.a_min)
    # don't brake below standstill within one tick
    return max(u, -state.v_veh / params.dt)


class CautiousController:
    """Stop-and-wait baseline that ignores the intention signal.

    Cruises at the reference speed; once the pedestrian is in the near or
    crossing zone with the safety TTC under threshold, brakes to a standstill,
    waits t_wait seconds, then resumes at slow_speed until the pedestrian has
    passed.  A pedestrian inside the crossing zone always extends the stop.
    """

    name = "cautious"

    CRUISE = "cruise"
    STOPPED = "stopped"
    RESUMING = "resuming"

    def __init__(self, params: ControllerParams, geometry: ScenarioGeometry,
                 metrics_cfg: MetricsConfig | None = None) -> None:
        self.params = params
        self.geometry = geometry
        self.metrics_cfg = metrics_cfg or MetricsConfig()
        self.mode = self.CRUISE
        self.stop_clock = 0.0
        self._last_t: float | None = None

    def reset(self) -> None:
        self.mode = self.CRUISE
        self.stop_clock = 0.0
        self._last_t = None

    def _elapsed(self, t: float) -> float:
        dt = 0.0 if self._last_t is None else max(t - self._last_t, 0.0)
        self._last_t = t
        return dt

    def decide(self, state: JointState, intention: float) -> Decision:
        params, geometry = self.params, self.geometry
        dt = self._elapsed(state.t)
        zone = classify_zone(state.y_ped, geometry)

        if is_ped_passed(state, geometry) or is_veh_passed(state, geometry):
            self.mode = self.CRUISE
            u = velocity_tracking(state, params)
            return Decision(u=u, intention_eff=intention, zone=zone.value,
                            diag={"mode": self.mode})

        ttc = ttc_metric(state, geometry, self.metrics_cfg)
        triggered = zone in (ZoneLabel.NEAR, ZoneLabel.CROSSING) and ttc < params.ttc_threshold

        if self.mode == self.CRUISE and triggered:
            self.mode = self.STOPPED
            self.stop_clock = 0.0
        elif self.mode == self.RESUMING and zone is ZoneLabel.CROSSING:
            # safety overrides the resume: someone stepped into the roadway
            self.mode = self.STOPPED
            self.stop_clock = 0.0

        if self.mode == self.STOPPED:
            if state.v_veh < 0.1:
                self.stop_clock += dt
            if self.stop_clock >= params.t_wait and zone is not ZoneLabel.CROSSING:
                self.mode = self.RESUMING
            else:
                u = stop_command(state, geometry, params)
                return Decision(u=u, intention_eff=intention, zone=zone.value,
                                diag={"mode": self.mode, "stop_clock": round(self.stop_clock, 6)})

        if self.mode == self.RESUMING:
            u = velocity_tracking(state, params, v_target=params.slow_speed)
            return Decision(u=u, intention_eff=intention, zone=zone.value,
                            diag={"mode": self.mode})

        u = velocity_tracking(state, params)
        return Decision(u=u, intention_eff=intention, zone=zone.value,
                        diag={"mode": self.mode})


class RuleBasedController:
    """Intention-gated rule ladder.

    Priority order, exactly one rule fires per tick:

      a) pedestrian in the crossing zone           -> brake to standstill
      b) safe/near zone, TTC under threshold and
         intention above threshold                 -> brake to standstill
      c) near zone, intention above threshold,
         TTC at or above threshold                 -> track slow_speed
      d) otherwise                                 -> track the reference speed

    A standstill timeout mirrors the cautious baseline: once the pedestrian
    has stood still in the safe/near zone for t_wait seconds, rules (b) and
    (c) are suppressed until the pedestrian moves again, so a frozen
    pedestrian cannot hold the vehicle forever.
    """

    name = "rulebased"

    def __init__(self, params: ControllerParams, geometry: ScenarioGeometry,
                 metrics_cfg: MetricsConfig | None = None) -> None:
        self.params = params
        self.geometry = geometry
        self.metrics_cfg = metrics_cfg or MetricsConfig()
        self.standstill_clock = 0.0
        self._last_t: float | None = None

    def reset(self) -> None:
        self.standstill_clock = 0.0
        self._last_t = None

    def decide(self, state: JointState, intention: float) -> Decision:
        params, geometry = self.params, self.geometry
        dt = 0.0 if self._last_t is None else max(state.t - self._last_t, 0.0)
        self._last_t = state.t
        zone = classify_zone(state.y_ped, geometry)

        standing = abs(state.v_ped) < params.standstill_speed
        if standing and zone in (ZoneLabel.SAFE, ZoneLabel.NEAR):
            self.standstill_clock += dt
        else:
            self.standstill_clock = 0.0
        timed_out = self.standstill_clock >= params.t_wait

        if is_ped_passed(state, geometry) or is_veh_passed(state, geometry):
            u = velocity_tracking(state, params)
            return Decision(u=u, intention_eff=intention, zone=zone.value,
                            diag={"rule": "d"})

        ttc = ttc_metric(state, geometry, self.metrics_cfg)
        wants_to_cross = intention > params.intention_threshold and not timed_out

        if zone is ZoneLabel.CROSSING:
            rule, u = "a", stop_command(state, geometry, params)
        elif zone in (ZoneLabel.SAFE, ZoneLabel.NEAR) and ttc < params.ttc_threshold and wants_to_cross:
            rule, u = "b", stop_command(state, geometry, params)
        elif zone is ZoneLabel.NEAR and wants_to_cross and ttc >= params.ttc_threshold:
            rule, u = "c", velocity_tracking(state, params, v_target=params.slow_speed)
        else:
            rule, u = "d", velocity_tracking(state, params)

        diag = {"rule": rule, "ttc": round(ttc, 6)}
        if timed_out:
            diag["standstill_timeout"] = True
        return Decision(u=u, intention_eff=intention, zone=zone.value, diag=diag)
