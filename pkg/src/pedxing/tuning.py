"""Parameter tuning: a scalar episode objective and a bounded, seeded,
derivative-free search over the controller's tunable vector.

The episode objective trades resolution time, input effort, realized
separation and inverse-TTC risk; the tuner is a deterministic population
initialization followed by a Nelder-Mead polish, every candidate projected
into the bounds.  tune() never returns a point worse than its start.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import Config, TuningSettings
from .pedestrian import model_ttc
from .scenario import THETA_FIELDS, ControllerParams, ScenarioGeometry, separation
from .simulate import make_controller, run_episode
from .trace import EpisodeTrace

__all__ = [
    "episode_cost",
    "TuneResult",
    "tune",
    "tune_controller",
    "expert_loop_step",
]


def episode_cost(trace: EpisodeTrace, geometry: ScenarioGeometry,
                 params: ControllerParams, settings: TuningSettings,
                 kappa: float = 0.05) -> float:
    """Scalar quality of one episode (lower is better).

    Integrates k_time * t + k_accel * |u|^2 + k_inv_ttc * max(0, 1/TTC)
    over the episode (1/TTC clamped to [0, 1/kappa] and zeroed once the
    model TTC is non-positive), then subtracts k_separation times the
    realized minimum vehicle-pedestrian separation.
    """
    states = trace.states()
    if len(states) < 2:
        raise ValueError("episode_cost needs at least two trace ticks")
    times = np.array([s.t for s in states])
    u = np.array([tick.u_cmd for tick in trace.ticks])

    inv_cap = 1.0 / kappa
    inv_ttc = np.zeros(len(states))
    for i, s in enumerate(states):
        ttc = model_ttc(s, geometry, params)
        if ttc > 0.0:
            inv_ttc[i] = min(1.0 / ttc, inv_cap)

    integrand = (settings.k_time * times
                 + settings.k_accel * u ** 2
                 + settings.k_inv_ttc * inv_ttc)
    sep_min = min(separation(s, geometry) for s in states)
    return float(np.trapezoid(integrand, times) - settings.k_separation * abs(sep_min))


@dataclass
class TuneResult:
    theta: np.ndarray
    value: float
    history: list[tuple[np.ndarray, float]]    # every evaluation, in order

    @property
    def evals(self) -> int:
        return len(self.history)


def tune(objective, theta0: np.ndarray, bounds: np.ndarray, budget: int,
         seed: int = 0) -> TuneResult:
    """Minimize objective(theta) inside box bounds within an evaluation budget.

    Deterministic for a given seed: a small uniform population seeds the
    search, then Nelder-Mead refines from the best point with every vertex
    clipped into the box.  theta0 is always evaluated first, so the result
    is never worse than the (projected) start.
    """
    theta0 = np.asarray(theta0, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    d = theta0.size
    if bounds.shape != (d, 2):
        raise ValueError(f"bounds must have shape ({d}, 2), got {bounds.shape}")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo >= hi):
        raise ValueError("tune: every bound must satisfy lo < hi")
    if budget < 1:
        raise ValueError(f"tune: budget must be >= 1, got {budget}")

    history: list[tuple[np.ndarray, float]] = []

    def f(x: np.ndarray) -> float:
        x = np.clip(x, lo, hi)
        value = float(objective(x))
        history.append((x.copy(), value))
        return value

    start = np.clip(theta0, lo, hi)
    f(start)

    rng = np.random.default_rng(seed)
    n_init = min(max(2 * d, 4), max(budget // 4, 1))
    for _ in range(n_init):
        if len(history) >= budget:
            break
        f(lo + rng.random(d) * (hi - lo))

    def best_entry():
        return min(history, key=lambda e: e[1])

    # simplex around the best point so far
    base = best_entry()[0]
    simplex = [base.copy()]
    values = [best_entry()[1]]
    span = 0.1 * (hi - lo)
    for i in range(d):
        if len(history) >= budget:
            break
        vertex = base.copy()
        step = span[i] if base[i] + span[i] <= hi[i] else -span[i]
        vertex[i] = np.clip(base[i] + step, lo[i], hi[i])
        simplex.append(vertex)
        values.append(f(vertex))

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    while len(history) < budget and len(simplex) == d + 1:
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if abs(values[-1] - values[0]) < 1e-15:
            break
        centroid = np.mean(simplex[:-1], axis=0)

        reflected = np.clip(centroid + alpha * (centroid - simplex[-1]), lo, hi)
        fr = f(reflected)
        if fr < values[0] and len(history) < budget:
            expanded = np.clip(centroid + gamma * (reflected - centroid), lo, hi)
            fe = f(expanded)
            if fe < fr:
                simplex[-1], values[-1] = expanded, fe
            else:
                simplex[-1], values[-1] = reflected, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = reflected, fr
        elif len(history) < budget:
            contracted = np.clip(centroid + rho * (simplex[-1] - centroid), lo, hi)
            fc = f(contracted)
            if fc < values[-1]:
                simplex[-1], values[-1] = contracted, fc
            else:
                for i in range(1, d + 1):
                    if len(history) >= budget:
                        break
                    simplex[i] = np.clip(simplex[0] + sigma * (simplex[i] - simplex[0]), lo, hi)
                    values[i] = f(simplex[i])

    theta_best, value_best = best_entry()
    return TuneResult(theta=theta_best, value=value_best, history=history)


def controller_objective(config: Config, free: tuple[str, ...]):
    """Objective over the free controller parameters: mean episode cost of the
    MPC controller across the configured tuning scenarios and seeds."""
    settings = config.tuning
    base_theta = config.controller.as_theta()
    idx = [THETA_FIELDS.index(name) for name in free]

    def objective(sub: np.ndarray) -> float:
        theta = base_theta.copy()
        theta[idx] = sub
        params = config.controller.with_theta(theta)
        costs = []
        for scenario in settings.scenarios:
            script = config.scripts[scenario]
            for seed in settings.episode_seeds:
                controller = make_controller("mpc", params, config.geometry, config.metrics)
                trace = run_episode(script, controller, config.geometry, params,
                                    config.sim, seed, config_hash=config.hash,
                                    scenario_name=scenario)
                costs.append(episode_cost(trace, config.geometry, params, settings,
                                          kappa=config.metrics.kappa))
        return float(np.mean(costs))

    return objective


def tune_controller(config: Config) -> tuple[TuneResult, dict[str, float]]:
    """Run the configured tuning session; returns the result and the tuned
    controller overrides (free parameter name -> value)."""
    settings = config.tuning
    if not settings.free:
        raise ValueError("tuning.free: nothing to tune")
    missing = [name for name in settings.free if name not in settings.bounds]
    if missing:
        raise ValueError(f"tuning.bounds: missing bounds for {missing}")

    theta0 = np.array([getattr(config.controller, name) for name in settings.free])
    bounds = np.array([settings.bounds[name] for name in settings.free])
    objective = controller_objective(config, settings.free)
    result = tune(objective, theta0, bounds, settings.budget, settings.seed)
    overrides = {name: float(v) for name, v in zip(settings.free, result.theta)}
    return result, overrides


def expert_loop_step(config: Config, new_ks: dict[str, float],
                     previous_report: dict | None = None) -> dict:
    """One round of the expert loop: adopt new objective weights, re-tune,
    and report the outcome next to the previous round."""
    allowed = {"k_time", "k_accel", "k_separation", "k_inv_ttc"}
    bad = sorted(set(new_ks) - allowed)
    if bad:
        raise ValueError(f"unknown objective weights: {bad}; expected {sorted(allowed)}")
    tuning = replace(config.tuning, **{k: float(v) for k, v in new_ks.items()})
    stepped = replace(config, tuning=tuning)
    result, overrides = tune_controller(stepped)
    report = {
        "weights": {
            "k_time": tuning.k_time,
            "k_accel": tuning.k_accel,
            "k_separation": tuning.k_separation,
            "k_inv_ttc": tuning.k_inv_ttc,
        },
        "theta": overrides,
        "objective": result.value,
        "evals": result.evals,
        "previous": {
            "weights": previous_report.get("weights"),
            "theta": previous_report.get("theta"),
            "objective": previous_report.get("objective"),
        } if previous_report else None,
    }
    return report
