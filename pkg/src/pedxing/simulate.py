"""Fixed-step episode simulator with scripted pedestrian behaviors.

The plant runs at dt_sim (vehicle double integrator with speed clamped to
[0, v_max], pedestrian commanded speed through a first-order lag); the
controller runs every dt / dt_sim plant ticks and its command is held in
between.  Four scripted behaviors cover the study conditions: crossing,
remaining at the curb, and the two delayed variants where the pedestrian
hesitates, then changes its mind.  Hesitation point and duration carry
seeded Gaussian jitter so batches produce distributions rather than
repeats; everything else is deterministic in (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .baselines import CautiousController, RuleBasedController
from .metrics import MetricsConfig
from .mpc import MpcController
from .scenario import (
    ControllerParams,
    JointState,
    ScenarioGeometry,
    classify_zone,
    is_ped_passed,
    is_veh_passed,
)
from .trace import EpisodeTrace, Outcome, TickRecord

__all__ = [
    "SCENARIO_KINDS",
    "CONTROLLER_NAMES",
    "ScenarioScript",
    "ScriptedPedestrian",
    "SimConfig",
    "make_controller",
    "run_episode",
    "run_batch",
    "BatchItem",
]

SCENARIO_KINDS = ("crossing", "remaining", "delayed_crossing", "delayed_remaining")
CONTROLLER_NAMES = ("mpc", "rulebased", "cautious")


@dataclass(frozen=True)
class ScenarioScript:
    """Parameters of one scripted pedestrian behavior.

    ``hesitation_point`` doubles as the standing position for the remaining
    kinds; it must lie in the safe or near zone.  Jitter standard deviations
    apply per episode, drawn once from the episode seed.
    """

    kind: str
    hesitation_point: float = -3.0      # [m] on the pedestrian axis
    hesitation_duration: float = 2.5    # [s]
    point_jitter_sd: float = 0.3        # [m]
    duration_jitter_sd: float = 0.5     # [s]
    approach_speed: float = 1.2         # walking speed toward the roadway [m/s]
    crossing_speed: float = 1.4         # speed while committed to cross [m/s]
    commit_gap_margin: float = 1.5      # extra vehicle-gap seconds required to step in [s]
    curb_standoff: float = 0.7          # distance before the roadway where the gap is checked [m]

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"ScenarioScript.kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if self.hesitation_duration < 0:
            raise ValueError("ScenarioScript.hesitation_duration must be >= 0")
        if min(self.point_jitter_sd, self.duration_jitter_sd) < 0:
            raise ValueError("ScenarioScript jitter standard deviations must be >= 0")

    def validate_against(self, geometry: ScenarioGeometry) -> None:
        lo, hi = geometry.safe_zone[0], geometry.near_zone[1]
        if not lo <= self.hesitation_point < hi:
            raise ValueError(
                f"ScenarioScript.hesitation_point {self.hesitation_point} must lie in the "
                f"safe or near zone [{lo}, {hi})")


class ScriptedPedestrian:
    """Per-tick pedestrian policy: act(state) -> (target_speed, intention).

    Phases: approach -> (hesitate ->) commit | yield -> done.  The crossing
    kinds gate the step into the roadway on an acceptable vehicle gap (the
    vehicle is far, braking open a gap, or effectively stopped), mirroring
    an instructed participant who only crosses when it feels safe.  The
    intention signal is piecewise constant per phase.
    """

    def __init__(self, script: ScenarioScript, geometry: ScenarioGeometry, seed: int,
                 lag_tau: float = 0.0):
        script.validate_against(geometry)
        self.script = script
        self.geometry = geometry
        self.lag_tau = lag_tau          # body speed lag; anticipated when stopping
        rng = np.random.default_rng(seed)
        point = script.hesitation_point
        duration = script.hesitation_duration
        if script.kind in ("delayed_crossing", "delayed_remaining"):
            point += script.point_jitter_sd * rng.standard_normal()
            duration += script.duration_jitter_sd * rng.standard_normal()
        lo, hi = geometry.safe_zone[0], geometry.near_zone[1]
        self.stand_point = float(min(max(point, lo + 0.15), hi - 0.15))
        self.hesitation = float(max(duration, 0.0))
        self.phase = "approach"
        self._hesitate_since: float | None = None

    def _reached_stand_point(self, state: JointState) -> bool:
        # with a first-order lag the body coasts v*tau past the command, so
        # stop early by that much to settle at the stand point
        return state.y_ped >= self.stand_point - max(state.v_ped, 0.0) * self.lag_tau

    def _gap_acceptable(self, state: JointState) -> bool:
        g = self.geometry
        if is_veh_passed(state, g) or state.x_veh > g.conflict_x:
            return True
        if state.v_veh < 0.3:
            return True
        t_veh = (g.conflict_x - state.x_veh) / state.v_veh
        t_clear = (g.crossing_zone[1] - state.y_ped) / self.script.crossing_speed
        return t_veh >= t_clear + self.script.commit_gap_margin

    def act(self, state: JointState) -> tuple[float, float]:
        s, g = self.script, self.geometry
        kind = s.kind

        if self.phase != "done" and is_ped_passed(state, g):
            self.phase = "done"

        if self.phase == "approach":
            if kind in ("delayed_crossing", "delayed_remaining") and self._reached_stand_point(state):
                self.phase = "hesitate"
                self._hesitate_since = state.t
            elif kind == "remaining" and self._reached_stand_point(state):
                self.phase = "yield"
            elif kind == "crossing":
                self.phase = "commit"

        if self.phase == "hesitate" and state.t - self._hesitate_since >= self.hesitation:
            self.phase = "commit" if kind == "delayed_crossing" else "yield"

        if self.phase == "approach":
            intention = 1.0 if kind in ("crossing", "delayed_remaining") else 0.0
            return s.approach_speed, intention
        if self.phase == "hesitate":
            intention = 1.0 if kind == "delayed_remaining" else 0.0
            return 0.0, intention
        if self.phase == "commit":
            if state.y_ped >= g.crossing_zone[0]:      # in the roadway: committed
                return s.crossing_speed, 1.0
            at_curb = state.y_ped >= g.crossing_zone[0] - s.curb_standoff
            if at_curb and not self._gap_acceptable(state):
                return 0.0, 1.0                        # wait at the curb for a workable gap
            return s.crossing_speed, 1.0
        if self.phase == "yield":
            return 0.0, 0.0
        return 0.0, 0.0  # done


@dataclass(frozen=True)
class SimConfig:
    dt_sim: float = 0.05            # plant step [s]
    t_max: float = 120.0            # episode cap [s]
    ped_lag_tau: float = 0.3        # pedestrian speed lag time constant [s]
    veh_start_x: float = -45.0      # [m]
    veh_start_speed: float = 8.33   # [m/s]
    ped_start_y: float = -6.5       # [m]
    ped_start_speed: float = 1.2    # [m/s]

    def __post_init__(self) -> None:
        if self.dt_sim <= 0:
            raise ValueError(f"SimConfig.dt_sim must be > 0, got {self.dt_sim}")
        if self.t_max <= 0:
            raise ValueError(f"SimConfig.t_max must be > 0, got {self.t_max}")
        if self.ped_lag_tau <= 0:
            raise ValueError(f"SimConfig.ped_lag_tau must be > 0, got {self.ped_lag_tau}")

    def controller_every(self, controller_dt: float) -> int:
        """Plant ticks per controller tick; controller_dt must be a multiple of dt_sim."""
        ratio = controller_dt / self.dt_sim
        k = round(ratio)
        if k < 1 or abs(ratio - k) > 1e-9:
            raise ValueError(
                f"controller dt {controller_dt} must be a positive integer multiple "
                f"of dt_sim {self.dt_sim}")
        return k


def plant_step(state: JointState, u: float, ped_target: float, dt: float,
               sim: SimConfig, params: ControllerParams) -> JointState:
    """Advance the physical plant one dt: clamped double integrator plus
    exact first-order speed lag for the pedestrian."""
    v_new = min(max(state.v_veh + dt * u, 0.0), params.v_veh_max)
    x_new = state.x_veh + 0.5 * dt * (state.v_veh + v_new)
    decay = math.exp(-dt / sim.ped_lag_tau)
    vp_new = ped_target + (state.v_ped - ped_target) * decay
    # exact integral of the exponential approach over the step
    y_new = state.y_ped + ped_target * dt + (state.v_ped - ped_target) * sim.ped_lag_tau * (1.0 - decay)
    return JointState(t=state.t + dt, x_veh=x_new, v_veh=v_new, y_ped=y_new, v_ped=vp_new)


def make_controller(name: str, params: ControllerParams, geometry: ScenarioGeometry,
                    metrics_cfg: MetricsConfig | None = None):
    if name == "mpc":
        return MpcController(params, geometry)
    if name == "rulebased":
        return RuleBasedController(params, geometry, metrics_cfg)
    if name == "cautious":
        return CautiousController(params, geometry, metrics_cfg)
    raise ValueError(f"unknown controller {name!r}; expected one of {CONTROLLER_NAMES}")


def run_episode(script: ScenarioScript, controller, geometry: ScenarioGeometry,
                params: ControllerParams, sim: SimConfig, seed: int,
                config_hash: str = "", scenario_name: str | None = None) -> EpisodeTrace:
    """Run one closed-loop episode to resolution or timeout.

    The episode ends the first time either agent clears the conflict; the
    terminal tick is included in the trace.
    """
    every = sim.controller_every(params.dt)
    controller.reset()
    ped = ScriptedPedestrian(script, geometry, seed, lag_tau=sim.ped_lag_tau)
    trace = EpisodeTrace(
        scenario=scenario_name or script.kind,
        controller=getattr(controller, "name", type(controller).__name__),
        seed=seed,
        config_hash=config_hash,
    )

    state = JointState(t=0.0, x_veh=sim.veh_start_x, v_veh=sim.veh_start_speed,
                       y_ped=sim.ped_start_y, v_ped=sim.ped_start_speed)
    n_ticks = int(round(sim.t_max / sim.dt_sim))
    u_hold = 0.0
    decision = None

    for i in range(n_ticks + 1):
        target, intention = ped.act(state)
        if i % every == 0:
            decision = controller.decide(state, intention)
            u_hold = decision.u
        trace.ticks.append(TickRecord(
            t=state.t, x_veh=state.x_veh, v_veh=state.v_veh,
            y_ped=state.y_ped, v_ped=state.v_ped, u_cmd=u_hold,
            intention_raw=float(intention),
            intention_eff=float(decision.intention_eff),
            zone=classify_zone(state.y_ped, geometry).value,
            diag=decision.diag if i % every == 0 else {},
        ))
        if is_ped_passed(state, geometry):
            trace.t_end, trace.outcome = state.t, Outcome.PED_FIRST
            break
        if is_veh_passed(state, geometry):
            trace.t_end, trace.outcome = state.t, Outcome.VEH_FIRST
            break
        if i == n_ticks:
            trace.t_end, trace.outcome = state.t, Outcome.TIMEOUT
            break
        state = plant_step(state, u_hold, target, sim.dt_sim, sim, params)
    return trace


@dataclass(frozen=True)
class BatchItem:
    scenario: str
    controller: str
    seed: int


def run_batch(items: list[BatchItem], scripts: dict[str, ScenarioScript],
              geometry: ScenarioGeometry, params: ControllerParams, sim: SimConfig,
              metrics_cfg: MetricsConfig | None = None, config_hash: str = "",
              workers: int = 1, on_result=None) -> list[EpisodeTrace | Exception]:
    """Run a batch of independent episodes in canonical order.

    Results are ordered by (scenario, controller, seed) regardless of
    execution order or worker count.  A failing episode is recorded as the
    exception in its slot; the batch continues.
    """
    ordered = sorted(items, key=lambda it: (it.scenario, it.controller, it.seed))

    def _one(item: BatchItem) -> EpisodeTrace:
        script = scripts[item.scenario]
        controller = make_controller(item.controller, params, geometry, metrics_cfg)
        return run_episode(script, controller, geometry, params, sim, item.seed,
                           config_hash=config_hash, scenario_name=item.scenario)

    results: list[EpisodeTrace | Exception] = []
    if workers <= 1:
        for item in ordered:
            try:
                res: EpisodeTrace | Exception = _one(item)
            except Exception as exc:  # noqa: BLE001 - recorded, not fatal
                res = exc
            results.append(res)
            if on_result is not None:
                on_result(item, res)
        return results

    import concurrent.futures

    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_batch_item, item, scripts[item.scenario], geometry,
                        params, sim, metrics_cfg, config_hash)
            for item in ordered
        ]
        for item, fut in zip(ordered, futures):
            try:
                res = fut.result()
            except Exception as exc:  # noqa: BLE001
                res = exc
            results.append(res)
            if on_result is not None:
                on_result(item, res)
    return results


def _run_batch_item(item: BatchItem, script: ScenarioScript, geometry: ScenarioGeometry,
                    params: ControllerParams, sim: SimConfig,
                    metrics_cfg: MetricsConfig | None, config_hash: str) -> EpisodeTrace:
    controller = make_controller(item.controller, params, geometry, metrics_cfg)
    return run_episode(script, controller, geometry, params, sim, item.seed,
                       config_hash=config_hash, scenario_name=item.scenario)
