"""One-step maps: hand values, symplecticity, measured local orders."""

import numpy as np
import pytest

from symplearn.integrators import (IntegrationError, forward_euler_step,
                                   implicit_midpoint_step, rk45_integrate,
                                   symplectic_euler_step)
from symplearn.systems import exact_flow_spring, pendulum, spring
from conftest import central_jacobian


SPRING = spring()
PENDULUM = pendulum()


class TestForwardEuler:
    def test_spring_hand_value(self):
        res = forward_euler_step(SPRING.velocity, np.array([0.0, 1.0]), 0.1)
        assert np.allclose(res.y_next, [-0.1, 1.0], atol=1e-15)
        assert res.iterations == 0 and res.converged

    def test_zero_field_is_identity(self, rng):
        y = rng.normal(size=4)
        res = forward_euler_step(lambda _: np.zeros(4), y, 0.3)
        assert np.array_equal(res.y_next, y)

    def test_local_error_is_second_order(self):
        # Richardson ratio against the exact rotation: error ~ h^2 -> ratio 4
        y0 = np.array([0.4, 0.8])

        def err(h):
            res = forward_euler_step(SPRING.velocity, y0, h)
            return np.linalg.norm(res.y_next - exact_flow_spring(y0, h))

        ratio = err(0.1) / err(0.05)
        assert 3.5 <= ratio <= 4.5

    def test_rejects_non_positive_step(self):
        with pytest.raises(ValueError):
            forward_euler_step(SPRING.velocity, np.zeros(2), 0.0)


class TestSymplecticEuler:
    def test_spring_hand_value(self):
        res = symplectic_euler_step(SPRING.gradient, np.array([0.0, 1.0]), 0.1)
        assert np.allclose(res.y_next, [-0.1, 0.99], atol=1e-15)
        assert res.converged

    def test_separable_converges_in_one_iteration(self):
        res = symplectic_euler_step(PENDULUM.gradient, np.array([0.5, 1.0]), 0.2)
        assert res.iterations == 1
        assert res.converged

    def test_step_map_is_area_preserving(self):
        y = np.array([0.5, 1.0])

        def step(point):
            return symplectic_euler_step(PENDULUM.gradient, point, 0.2).y_next

        det = np.linalg.det(central_jacobian(step, y))
        assert abs(det - 1.0) < 1e-8


class TestImplicitMidpoint:
    def test_zero_field_is_identity(self, rng):
        y = rng.normal(size=2)
        res = implicit_midpoint_step(lambda _: np.zeros(2), y, 0.5)
        assert np.allclose(res.y_next, y, atol=1e-15)

    def test_conserves_quadratic_energy_in_one_step(self):
        y0 = np.array([0.3, 0.9])
        res = implicit_midpoint_step(SPRING.velocity, y0, 0.4)
        assert res.converged
        assert abs(SPRING.hamiltonian(res.y_next) - SPRING.hamiltonian(y0)) < 1e-10

    def test_local_error_is_third_order(self):
        y0 = np.array([0.5, 1.0])

        def err(h):
            res = implicit_midpoint_step(PENDULUM.velocity, y0, h, tol=1e-14)
            ref = rk45_integrate(PENDULUM.velocity, y0, h, rtol=1e-12, atol=1e-12)[-1]
            return np.linalg.norm(res.y_next - ref)

        ratio = err(0.2) / err(0.1)
        assert 7.0 <= ratio <= 9.0


class TestSymplecticityAcrossSteps:
    @pytest.mark.parametrize("h", [0.05, 0.2, 0.8])
    @pytest.mark.parametrize("system", [SPRING, PENDULUM], ids=["spring", "pendulum"])
    def test_symplectic_maps_have_unit_jacobian(self, system, h, rng):
        for _ in range(20):
            y = rng.uniform(0.5 * system.data_region[:, 0],
                            0.5 * system.data_region[:, 1])

            def se(point):
                return symplectic_euler_step(system.gradient, point, h, tol=1e-14).y_next

            def mp(point):
                return implicit_midpoint_step(system.velocity, point, h, tol=1e-14).y_next

            for step in (se, mp):
                det = np.linalg.det(central_jacobian(step, y))
                assert abs(det - 1.0) <= 1e-6

    @pytest.mark.parametrize("h", [0.05, 0.2, 0.8])
    def test_forward_euler_expands_spring_area(self, h):
        # the explicit Euler map on the spring is linear with det 1 + h^2
        def step(point):
            return forward_euler_step(SPRING.velocity, point, h).y_next

        det = np.linalg.det(central_jacobian(step, np.array([0.2, -0.6])))
        assert abs(det - (1.0 + h * h)) <= 1e-8


class TestAdaptiveIntegration:
    def test_quarter_period_spring(self):
        got = rk45_integrate(SPRING.velocity, np.array([0.0, 1.0]), np.pi / 2,
                             rtol=1e-10, atol=1e-10)[-1]
        assert np.allclose(got, [-1.0, 0.0], atol=1e-8)

    def test_zero_field_constant_trajectory(self):
        traj = rk45_integrate(lambda _: np.zeros(2), np.array([1.0, 2.0]), 5.0,
                              t_eval=[1.0, 2.5, 5.0])
        assert np.allclose(traj, [[1.0, 2.0]] * 3, atol=1e-14)

    def test_pendulum_energy_conservation(self):
        y0 = np.array([0.7, 1.9])
        got = rk45_integrate(PENDULUM.velocity, y0, 10.0, rtol=1e-10, atol=1e-10)[-1]
        assert abs(PENDULUM.hamiltonian(got) - PENDULUM.hamiltonian(y0)) <= 1e-7

    def test_failure_raises(self):
        def blow_up(y):
            return y * y * 1e3 + 1.0

        with pytest.raises(IntegrationError):
            rk45_integrate(blow_up, np.array([1.0]), 10.0)

    def test_rejects_non_positive_time(self):
        with pytest.raises(ValueError):
            rk45_integrate(SPRING.velocity, np.zeros(2), 0.0)


def test_steps_are_deterministic():
    y = np.array([0.3, 0.7])
    a = implicit_midpoint_step(PENDULUM.velocity, y, 0.2)
    b = implicit_midpoint_step(PENDULUM.velocity, y, 0.2)
    assert np.array_equal(a.y_next, b.y_next)
    assert a.iterations == b.iterations
