import numpy as np
import pytest

from pedxing.dynamics import (
    build_batch,
    disturbance_stack,
    predict,
    rollout,
    rollout_arrays,
    step,
    system_matrices,
)
from pedxing.pedestrian import ped_next_velocity
from pedxing.scenario import JointState


def random_state(rng, t=0.0):
    return JointState(t=t, x_veh=float(rng.uniform(-50, 5)),
                      v_veh=float(rng.uniform(0, 14)),
                      y_ped=float(rng.uniform(-8, 3)),
                      v_ped=float(rng.uniform(-0.5, 2)))


class TestSystemMatrices:
    def test_structure(self):
        a, b = system_matrices(0.2)
        expected_a = np.array([
            [1.0, 0.2, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.2],
            [0.0, 0.0, 0.0, 0.0],   # pedestrian speed is replaced, not integrated
        ])
        expected_b = np.array([0.5 * 0.2 ** 2, 0.2, 0.0, 0.0])
        np.testing.assert_allclose(a, expected_a)
        np.testing.assert_allclose(b, expected_b)

    def test_step_hand_values(self):
        # x' = 0 + 0.2*10 + 0.02*1 = 2.02, v' = 10.2
        # y' = -3 + 0.2*0.7 = -2.86,   pedestrian speed becomes the disturbance
        s = JointState(t=1.0, x_veh=0.0, v_veh=10.0, y_ped=-3.0, v_ped=0.7)
        s2 = step(s, u=1.0, z_ped_speed=0.4, dt=0.2)
        assert s2.t == pytest.approx(1.2)
        assert s2.x_veh == pytest.approx(2.02)
        assert s2.v_veh == pytest.approx(10.2)
        assert s2.y_ped == pytest.approx(-2.86)
        assert s2.v_ped == pytest.approx(0.4)

    def test_step_matches_matrix_form(self):
        rng = np.random.default_rng(3)
        a, b = system_matrices(0.2)
        for _ in range(50):
            s = random_state(rng)
            u = float(rng.uniform(-4, 2))
            z = float(rng.uniform(-0.5, 2))
            nxt = step(s, u, z, 0.2)
            vec = a @ s.as_vector() + b * u + np.array([0.0, 0.0, 0.0, z])
            np.testing.assert_allclose(nxt.as_vector(), vec, atol=1e-12)


class TestBatchOperators:
    def test_against_naive_power_construction(self):
        # oracle: accumulate A^i by repeated multiplication, column by column
        rng = np.random.default_rng(7)
        for n in (1, 2, 5, 9):
            dt = float(rng.uniform(0.05, 0.5))
            a, b = system_matrices(dt)
            ops = build_batch(n, dt)
            power = np.eye(4)
            a_naive = np.zeros((4 * n, 4))
            for i in range(n):
                power = power @ a
                a_naive[4 * i:4 * i + 4] = power
            np.testing.assert_allclose(ops.a_stack, a_naive, atol=1e-12)
            for i in range(n):
                for j in range(n):
                    block = ops.b_stack[4 * i:4 * i + 4, j]
                    if j > i:
                        np.testing.assert_allclose(block, 0.0)
                    else:
                        np.testing.assert_allclose(
                            block, np.linalg.matrix_power(a, i - j) @ b, atol=1e-12)
                    zblock = ops.z_stack[4 * i:4 * i + 4, 4 * j:4 * j + 4]
                    if j > i:
                        np.testing.assert_allclose(zblock, 0.0)
                    else:
                        np.testing.assert_allclose(
                            zblock, np.linalg.matrix_power(a, i - j), atol=1e-12)

    def test_predict_equals_sequential(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            n = int(rng.integers(1, 21))
            dt = 0.2
            ops = build_batch(n, dt)
            s0 = random_state(rng, t=1.0)
            u = rng.uniform(-4, 2, n)
            z = rng.uniform(-0.5, 2, n)
            states = predict(s0, u, disturbance_stack(z), ops)
            ref = s0
            for k in range(n):
                ref = step(ref, float(u[k]), float(z[k]), dt)
                np.testing.assert_allclose(states[k].as_vector(), ref.as_vector(),
                                           atol=1e-9)
                assert states[k].t == pytest.approx(ref.t)

    def test_predict_validates_shapes(self):
        ops = build_batch(3, 0.2)
        s0 = JointState(t=0, x_veh=0, v_veh=1, y_ped=-5, v_ped=0)
        with pytest.raises(ValueError):
            predict(s0, np.zeros(4), np.zeros((3, 4)), ops)
        bad_z = np.zeros((3, 4))
        bad_z[0, 0] = 1.0
        with pytest.raises(ValueError):
            predict(s0, np.zeros(3), bad_z, ops)


class TestRollout:
    def test_sequential_and_array_forms_agree(self, geometry, params):
        rng = np.random.default_rng(23)
        for _ in range(30):
            s0 = random_state(rng)
            u = rng.uniform(params.a_min, params.a_max, params.n_horizon)
            states, z_speeds = rollout(s0, u, geometry, params)
            xs, vs, ys, vps, u_eff = rollout_arrays(
                s0.as_vector(), u[None, :], geometry, params, clip_speed=False)
            np.testing.assert_array_equal(u_eff[0], u)
            for k, s in enumerate(states):
                np.testing.assert_allclose(
                    [xs[0, k], vs[0, k], ys[0, k], vps[0, k]],
                    s.as_vector(), atol=1e-12)
            # disturbances are the pedestrian model evaluated along the path
            assert z_speeds[0] == pytest.approx(ped_next_velocity(s0, geometry, params))

    def test_clipping_reports_effective_acceleration(self, geometry, params):
        # near the speed cap, commanding a_max only realizes what the cap allows
        s0 = JointState(t=0, x_veh=-30.0, v_veh=13.8, y_ped=-6.0, v_ped=0.0)
        u = np.full((1, 4), params.a_max)
        xs, vs, ys, vps, u_eff = rollout_arrays(s0.as_vector(), u, geometry, params)
        assert vs[0, 0] == pytest.approx(params.v_veh_max)
        assert u_eff[0, 0] == pytest.approx((params.v_veh_max - 13.8) / params.dt)
        assert u_eff[0, 1] == pytest.approx(0.0)
        assert np.all(vs <= params.v_veh_max + 1e-12)

    def test_clipping_floors_speed_at_zero(self, geometry, params):
        s0 = JointState(t=0, x_veh=-30.0, v_veh=0.5, y_ped=-6.0, v_ped=0.0)
        u = np.full((1, 5), params.a_min)
        xs, vs, ys, vps, u_eff = rollout_arrays(s0.as_vector(), u, geometry, params)
        assert vs[0, 0] == pytest.approx(0.0)
        assert u_eff[0, 0] == pytest.approx(-0.5 / params.dt)
        assert np.all(vs >= 0.0)
        # a stopped vehicle stays put
        assert xs[0, 4] == pytest.approx(xs[0, 1])

    def test_frozen_disturbances_bypass_the_model(self, geometry, params):
        s0 = random_state(np.random.default_rng(2))
        n = 6
        z = np.linspace(0.1, 1.3, n)
        u = np.zeros((1, n))
        _, _, _, vps, _ = rollout_arrays(s0.as_vector(), u, geometry, params,
                                         z_speeds=z)
        np.testing.assert_allclose(vps[0], z, atol=1e-12)

    def test_many_rows_match_row_by_row(self, geometry, params):
        rng = np.random.default_rng(31)
        s0 = random_state(rng)
        u = rng.uniform(params.a_min, params.a_max, (12, 10))
        xs, vs, ys, vps, u_eff = rollout_arrays(s0.as_vector(), u, geometry, params)
        for i in range(12):
            xi, vi, yi, vpi, ui = rollout_arrays(s0.as_vector(), u[i][None, :],
                                                 geometry, params)
            np.testing.assert_array_equal(xs[i], xi[0])
            np.testing.assert_array_equal(vs[i], vi[0])
            np.testing.assert_array_equal(ys[i], yi[0])
            np.testing.assert_array_equal(vps[i], vpi[0])
            np.testing.assert_array_equal(u_eff[i], ui[0])
