"""Discrete joint vehicle-pedestrian dynamics and horizon prediction.

State vector x = [x_veh, v_veh, y_ped, v_ped].  The vehicle is a double
integrator driven by the commanded acceleration u; the pedestrian's position
integrates its speed, while the speed itself is fully replaced each step by
the behavior-model disturbance (the zero bottom row of A):

    x(k+1) = A x(k) + B u(k) + z(k),   z = [0, 0, 0, gain * v_ped_ref]

Stacking N steps gives the batch form x_s = A_s x0 + B_s u_s + Z_s z_s used
for linear prediction; `rollout` closes the loop through the pedestrian
model instead, recomputing z from each predicted state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pedestrian import ped_next_velocity
from .scenario import ControllerParams, JointState, ScenarioGeometry

__all__ = [
    "system_matrices",
    "step",
    "BatchOperators",
    "build_batch",
    "disturbance_stack",
    "predict",
    "rollout",
    "rollout_arrays",
]


def system_matrices(dt: float) -> tuple[np.ndarray, np.ndarray]:
    """The one-step (A, B) pair for step size dt."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    a = np.array([
        [1.0, dt, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, dt],
        [0.0, 0.0, 0.0, 0.0],
    ])
    b = np.array([0.5 * dt * dt, dt, 0.0, 0.0])
    return a, b


def step(state: JointState, u: float, z_ped_speed: float, dt: float) -> JointState:
    """One step of the joint dynamics.

    The pedestrian advances with its current speed, then adopts
    ``z_ped_speed`` as its new speed; the vehicle double-integrates u.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    return JointState(
        t=state.t + dt,
        x_veh=state.x_veh + dt * state.v_veh + 0.5 * dt * dt * u,
        v_veh=state.v_veh + dt * u,
        y_ped=state.y_ped + dt * state.v_ped,
        v_ped=z_ped_speed,
    )


@dataclass(frozen=True)
class BatchOperators:
    """Stacked horizon operators: x_s = a_stack x0 + b_stack u_s + z_stack z_s.

    a_stack is (4N, 4) holding A^1 .. A^N, b_stack is (4N, N) lower block
    triangular with block (i, j) = A^(i-j) B, z_stack is (4N, 4N) lower block
    triangular with identity diagonal blocks.
    """

    n: int
    dt: float
    a_stack: np.ndarray
    b_stack: np.ndarray
    z_stack: np.ndarray


def build_batch(n: int, dt: float) -> BatchOperators:
    """Construct the stacked prediction operators for an N-step horizon."""
    if n < 1:
        raise ValueError(f"horizon n must be >= 1, got {n}")
    a, b = system_matrices(dt)
    powers = [np.eye(4)]
    for _ in range(n):
        powers.append(a @ powers[-1])

    a_stack = np.zeros((4 * n, 4))
    b_stack = np.zeros((4 * n, n))
    z_stack = np.zeros((4 * n, 4 * n))
    for i in range(n):
        a_stack[4 * i:4 * i + 4] = powers[i + 1]
        for j in range(i + 1):
            b_stack[4 * i:4 * i + 4, j] = powers[i - j] @ b
            z_stack[4 * i:4 * i + 4, 4 * j:4 * j + 4] = powers[i - j]
    return BatchOperators(n=n, dt=dt, a_stack=a_stack, b_stack=b_stack, z_stack=z_stack)


def disturbance_stack(ped_speeds: np.ndarray) -> np.ndarray:
    """Disturbance sequence (N, 4) from the per-step pedestrian model speeds."""
    ped_speeds = np.asarray(ped_speeds, dtype=float)
    if ped_speeds.ndim != 1:
        raise ValueError(f"ped_speeds must be 1-d, got shape {ped_speeds.shape}")
    z = np.zeros((ped_speeds.size, 4))
    z[:, 3] = ped_speeds
    return z


def predict(x0: JointState, u_s: np.ndarray, z_s: np.ndarray,
            ops: BatchOperators) -> list[JointState]:
    """Linear batch prediction of the next N states.

    u_s has shape (N,), z_s shape (N, 4) with the first three entries of each
    disturbance vector zero.  Returns the states at t0 + dt .. t0 + N dt.
    """
    u_s = np.asarray(u_s, dtype=float)
    z_s = np.asarray(z_s, dtype=float)
    if u_s.shape != (ops.n,):
        raise ValueError(f"u_s must have shape ({ops.n},), got {u_s.shape}")
    if z_s.shape != (ops.n, 4):
        raise ValueError(f"z_s must have shape ({ops.n}, 4), got {z_s.shape}")
    if np.any(z_s[:, :3] != 0.0):
        raise ValueError("z_s entries other than the pedestrian speed must be zero")
    flat = ops.a_stack @ x0.as_vector() + ops.b_stack @ u_s + ops.z_stack @ z_s.reshape(-1)
    return [
        JointState.from_vector(x0.t + (i + 1) * ops.dt, flat[4 * i:4 * i + 4])
        for i in range(ops.n)
    ]


def rollout(x0: JointState, u_s: np.ndarray, geometry: ScenarioGeometry,
            params: ControllerParams) -> tuple[list[JointState], np.ndarray]:
    """Self-consistent forward rollout through the pedestrian model.

    The disturbance for each step is recomputed from the current predicted
    state, so the pedestrian reacts to the predicted vehicle motion.  Returns
    the predicted states and the realized disturbance speeds.
    """
    u_s = np.asarray(u_s, dtype=float)
    states: list[JointState] = []
    z_speeds = np.zeros(u_s.size)
    current = x0
    for k, u in enumerate(u_s):
        z_speeds[k] = ped_next_velocity(current, geometry, params)
        current = step(current, float(u), z_speeds[k], params.dt)
        states.append(current)
    return states, z_speeds


def rollout_arrays(x0: np.ndarray, u: np.ndarray, geometry: ScenarioGeometry,
                   params: ControllerParams, clip_speed: bool = True,
                   z_speeds: np.ndarray | None = None):
    """Vectorized rollout of M candidate input sequences.

    x0 is the bare state 4-vector, u has shape (M, N).  With ``clip_speed``
    the predicted vehicle speed is clamped to [0, v_veh_max] and the
    *effective* (possibly reduced) acceleration is reported back, so every
    returned trajectory respects the speed bounds by construction.  When
    ``z_speeds`` (N,) is given the pedestrian model is bypassed and the
    frozen disturbances are used instead.

    Returns (xs, vs, ys, vps, u_eff), each of shape (M, N), holding the
    predicted states at steps 1..N.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    m, n = u.shape
    dt = params.dt
    x = np.full(m, float(x0[0]))
    v = np.full(m, float(x0[1]))
    y = np.full(m, float(x0[2]))
    vp = np.full(m, float(x0[3]))

    xs = np.empty((m, n))
    vs = np.empty((m, n))
    ys = np.empty((m, n))
    vps = np.empty((m, n))
    u_eff = np.empty((m, n))

    inv_vref = 1.0 / params.v_ped_ref
    for k in range(n):
        if z_speeds is None:
            t_veh = (geometry.conflict_x - x) / np.maximum(v, params.v_eps)
            a = t_veh - (geometry.conflict_y - y) * inv_vref - params.c
            gain = np.empty_like(a)
            pos = a >= 0
            gain[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
            ea = np.exp(a[~pos])
            gain[~pos] = ea / (1.0 + ea)
            z_k = gain * params.v_ped_ref
        else:
            z_k = z_speeds[k]

        v_new = v + dt * u[:, k]
        if clip_speed:
            np.clip(v_new, 0.0, params.v_veh_max, out=v_new)
            ue = (v_new - v) / dt
        else:
            ue = u[:, k]
        x = x + dt * v + 0.5 * dt * dt * ue
        y = y + dt * vp
        v = v_new
        vp = np.broadcast_to(z_k, (m,)).copy() if np.ndim(z_k) == 0 else z_k

        xs[:, k] = x
        vs[:, k] = v
        ys[:, k] = y
        vps[:, k] = vp
        u_eff[:, k] = ue
    return xs, vs, ys, vps, u_eff
