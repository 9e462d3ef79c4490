"""Derivative engine against analytic results and finite differences."""

import numpy as np
import pytest

from symplearn import autodiff as ad
from conftest import central_gradient, central_hessian, rel_err


def quad_program(theta, y):
    return ad.vsum(ad.mul(y, y)) * 0.5


def product_program(theta, y):
    return ad.mul(y[0], y[1])


def tanh_net_program(width=16):
    """theta = (W1 flat, b1, w2, b2) for one hidden tanh layer on R^2."""

    def program(theta, y):
        w1 = ad.reshape(theta[: 2 * width], (width, 2))
        b1 = theta[2 * width: 3 * width]
        w2 = ad.reshape(theta[3 * width: 4 * width], (1, width))
        b2 = theta[4 * width]
        hidden = ad.tanh(ad.reshape(y, (1, 2)) @ w1.T + b1)
        return ad.vsum(hidden @ w2.T) + b2

    return program


def random_net_theta(width, rng):
    return rng.normal(scale=0.8, size=4 * width + 1)


class TestValueAndInputGradient:
    def test_half_sum_of_squares(self):
        value, grad = ad.value_and_input_gradient(quad_program, np.zeros(1),
                                                  np.array([1.0, 2.0]))
        assert value == 2.5
        assert np.array_equal(grad, [1.0, 2.0])

    def test_coordinate_product(self):
        value, grad = ad.value_and_input_gradient(product_program, np.zeros(1),
                                                  np.array([3.0, -1.0]))
        assert value == -3.0
        assert np.array_equal(grad, [-1.0, 3.0])

    def test_tanh_network_matches_finite_differences(self, rng):
        program = tanh_net_program()
        theta = random_net_theta(16, rng)
        y = np.array([0.3, -0.7])
        value, grad = ad.value_and_input_gradient(program, theta, y)

        def f(point):
            v, _ = ad.value_and_input_gradient(program, theta, point)
            return v

        assert rel_err(grad, central_gradient(f, y), floor=1e-8) < 1e-5

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ad.DimensionMismatchError):
            ad.value_and_input_gradient(quad_program, np.zeros(1),
                                        np.array([[1.0, 2.0]]))

    def test_rejects_non_finite_input(self):
        with pytest.raises(ad.NonFiniteError):
            ad.value_and_input_gradient(quad_program, np.zeros(1),
                                        np.array([np.nan, 0.0]))


class TestInputHessian:
    def test_half_sum_of_squares_gives_identity(self, rng):
        for _ in range(3):
            y = rng.normal(size=2)
            hess = ad.input_hessian(quad_program, np.zeros(1), y)
            assert np.allclose(hess, np.eye(2), atol=1e-14)

    def test_coordinate_product(self):
        hess = ad.input_hessian(product_program, np.zeros(1), np.array([4.0, 9.0]))
        assert np.allclose(hess, [[0.0, 1.0], [1.0, 0.0]], atol=1e-14)

    def test_tanh_network_matches_finite_differences(self, rng):
        program = tanh_net_program()
        theta = random_net_theta(16, rng)
        y = np.array([0.1, 0.2])
        hess = ad.input_hessian(program, theta, y)

        def f(point):
            v, _ = ad.value_and_input_gradient(program, theta, point)
            return v

        assert rel_err(hess, central_hessian(f, y), floor=1e-6) < 1e-4

    def test_raw_rows_nearly_symmetric_before_symmetrization(self, rng):
        program = tanh_net_program()
        theta = random_net_theta(16, rng)
        yv = ad.leaf(np.array([0.4, -0.2]))
        out = program(ad.constant(theta), yv)
        (g,) = ad.grad(out, [yv], create_graph=True)
        rows = np.array([ad.grad(g[i], [yv])[0].value for i in range(2)])
        scale = np.max(np.abs(rows))
        assert np.max(np.abs(rows - rows.T)) <= 1e-10 * scale
        hess = ad.input_hessian(program, theta, np.array([0.4, -0.2]))
        assert np.array_equal(hess, hess.T)


class TestParameterGradient:
    def test_linear_network_value_loss(self):
        # H(y) = w . y + b with theta = (w, b); loss = H(y0)
        y0 = np.array([0.7, -0.4])

        def loss(theta):
            return ad.dot(theta[:2], ad.constant(y0)) + theta[2]

        grad = ad.parameter_gradient(loss, np.array([0.3, 0.1, 2.0]))
        assert np.allclose(grad, [0.7, -0.4, 1.0], atol=1e-14)

    def test_linear_network_gradient_norm_loss(self):
        # loss = ||grad_y H||^2 = ||w||^2 for H = w . y + b
        y0 = np.array([0.7, -0.4])

        def loss(theta):
            yv = ad.leaf(y0)
            out = ad.dot(theta[:2], yv) + theta[2]
            (g,) = ad.grad(out, [yv], create_graph=True)
            return ad.norm_sq(g)

        grad = ad.parameter_gradient(loss, np.array([0.3, 0.1, 2.0]))
        assert np.allclose(grad, [0.6, 0.2, 0.0], atol=1e-12)

    def test_gradient_matching_loss_against_finite_differences(self, rng):
        # squared mismatch between a target velocity and the symplectic
        # gradient of a small tanh network, the shape of the training loss
        program = tanh_net_program(width=8)
        theta0 = random_net_theta(8, rng)
        y0 = np.array([0.5, -0.3])
        target = np.array([0.9, 0.4])

        def loss(theta):
            yv = ad.leaf(y0)
            out = program(theta, yv)
            (g,) = ad.grad(out, [yv], create_graph=True)
            vel = ad.concat([ad.neg(g[1:]), g[:1]])
            return ad.norm_sq(ad.constant(target) - vel)

        got = ad.parameter_gradient(loss, theta0)

        def scalar_loss(theta):
            yv = ad.leaf(y0)
            out = program(ad.constant(theta), yv)
            (g,) = ad.grad(out, [yv])
            vel = np.array([-g.value[1], g.value[0]])
            return float(np.sum((target - vel) ** 2))

        fd = central_gradient(scalar_loss, theta0, step=1e-6)
        assert rel_err(got, fd, floor=1e-8) < 1e-4

    def test_linear_in_loss_scaling(self, rng):
        program = tanh_net_program(width=8)
        theta0 = random_net_theta(8, rng)
        y0 = np.array([0.2, 0.6])

        def scaled(c):
            def loss(theta):
                yv = ad.leaf(y0)
                out = program(theta, yv)
                (g,) = ad.grad(out, [yv], create_graph=True)
                return ad.norm_sq(g) * c
            return ad.parameter_gradient(loss, theta0)

        base = scaled(1.0)
        for c in (2.0, -1.0, 10.0):
            assert rel_err(scaled(c), c * base) < 1e-12

    def test_depth_limit_raises(self, rng):
        program = tanh_net_program(width=4)
        theta0 = random_net_theta(4, rng)

        def loss(theta):
            yv = ad.leaf(np.array([0.1, 0.2]))
            out = program(theta, yv)
            (g,) = ad.grad(out, [yv], create_graph=True)
            (gg,) = ad.grad(g[0], [yv], create_graph=True)
            return gg[0]

        with pytest.raises(ad.UnsupportedNestingError):
            ad.parameter_gradient(loss, theta0)


class TestPrimitiveRules:
    """Every primitive agrees with central differences at random points."""

    CASES = {
        "affine": lambda y: ad.vsum(ad.reshape(y, (1, 3)) @ ad.constant(
            np.array([[0.3, -1.2], [2.0, 0.4], [-0.7, 1.1]])) + ad.constant(
            np.array([0.2, -0.5]))),
        "tanh": lambda y: ad.vsum(ad.tanh(y)),
        "sum": lambda y: ad.vsum(y * 3.0),
        "product": lambda y: ad.vsum(ad.mul(y[:2], y[1:])),
        "dot": lambda y: ad.dot(y[:2], y[1:]),
        "norm_sq": lambda y: ad.norm_sq(y),
    }

    @pytest.mark.parametrize("name", sorted(CASES))
    def test_primitive_gradient(self, name, rng):
        build = self.CASES[name]
        for _ in range(100):
            y = rng.uniform(-1.5, 1.5, size=3)
            yv = ad.leaf(y)
            (g,) = ad.grad(build(yv), [yv])

            def f(point):
                return float(build(ad.leaf(point)).value)

            fd = central_gradient(f, y)
            assert rel_err(g.value, fd, floor=1e-7) < 1e-5


def test_grad_of_constant_is_zero():
    y = ad.leaf(np.array([1.0, 2.0]))
    (g,) = ad.grad(ad.constant(5.0), [y])
    assert np.array_equal(g.value, np.zeros(2))


def test_grad_requires_scalar_output():
    y = ad.leaf(np.array([1.0, 2.0]))
    with pytest.raises(ad.DimensionMismatchError):
        ad.grad(ad.mul(y, y), [y])
