"""Network construction, evaluation and derivative plumbing."""

import numpy as np
import pytest

from symplearn.autodiff import DimensionMismatchError
from symplearn.mlp import (MlpParams, forward, forward_batch, init_mlp,
                           input_gradient, input_gradient_batch,
                           input_hessian_batch, join_pq, split_pq,
                           symplectic_field, symplectic_gradient,
                           symplectic_gradient_batch)
from conftest import central_gradient, rel_err


def straight_line_forward(params, y):
    """Independent re-implementation of the affine/tanh chain."""
    a = np.asarray(y, dtype=np.float64)
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(w @ a + b)
    return float(params.weights[-1] @ a + params.biases[-1])


class TestInit:
    def test_deterministic_given_seed(self):
        a = init_mlp(0, 1, 2, 16)
        b = init_mlp(0, 1, 2, 16)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            assert np.array_equal(ba, bb)

    def test_shapes_single_hidden_layer(self):
        params = init_mlp(0, 1, 1, 200)
        assert [w.shape for w in params.weights] == [(200, 2), (1, 200)]
        assert [b.shape for b in params.biases] == [(200,), (1,)]

    def test_shapes_deep_wide(self):
        params = init_mlp(0, 2, 3, 600)
        assert len(params.weights) == 4
        assert params.weights[0].shape == (600, 4)
        assert params.weights[1].shape == (600, 600)
        assert params.weights[-1].shape == (1, 600)

    def test_rejects_non_positive_dimensions(self):
        for bad in [(0, 1, 8), (1, 0, 8), (1, 1, 0)]:
            with pytest.raises(ValueError):
                init_mlp(0, *bad)

    def test_first_layer_biases_cover_the_box(self):
        params = init_mlp(3, 1, 1, 64, coord_half_widths=[2.0, 2.0])
        reach = np.abs(params.weights[0]) @ np.array([2.0, 2.0])
        assert np.all(np.abs(params.biases[0]) <= reach)
        assert params.biases[-1] == 0.0


class TestForward:
    def test_zero_parameters_give_zero(self, rng):
        params = MlpParams(n_dim=1, weights=[np.zeros((8, 2)), np.zeros((1, 8))],
                           biases=[np.zeros(8), np.zeros(1)])
        for _ in range(5):
            assert forward(params, rng.normal(size=2)) == 0.0

    def test_zero_preactivations_return_output_bias(self):
        params = MlpParams(n_dim=1, weights=[np.zeros((8, 2)), np.ones((1, 8))],
                           biases=[np.zeros(8), np.array([0.77])])
        assert forward(params, np.array([0.4, -0.9])) == 0.77

    def test_matches_independent_evaluator(self, rng):
        params = init_mlp(7, 2, 2, 24)
        for _ in range(10):
            y = rng.uniform(-2, 2, size=4)
            assert abs(forward(params, y) - straight_line_forward(params, y)) < 1e-12

    def test_batch_matches_single(self, rng):
        params = init_mlp(5, 1, 1, 16)
        batch = rng.uniform(-1, 1, size=(11, 2))
        vals = forward_batch(params, batch)
        for i, y in enumerate(batch):
            assert vals[i] == forward(params, y)

    def test_finite_for_large_inputs(self, rng):
        params = init_mlp(2, 1, 2, 16)
        for _ in range(10):
            y = rng.uniform(-1e3, 1e3, size=2)
            assert np.isfinite(forward(params, y))

    def test_rejects_dimension_mismatch(self):
        params = init_mlp(0, 1, 1, 8)
        with pytest.raises(DimensionMismatchError):
            forward(params, np.zeros(4))


class TestSymplecticGradient:
    def test_sign_and_ordering_convention(self, rng):
        params = init_mlp(11, 2, 1, 12)
        for _ in range(10):
            y = rng.uniform(-1, 1, size=4)
            g = input_gradient(params, y)
            expected = np.concatenate([-g[2:], g[:2]])
            assert np.array_equal(symplectic_gradient(params, y), expected)

    def test_zero_parameters_give_zero_field(self):
        params = MlpParams(n_dim=1, weights=[np.zeros((4, 2)), np.zeros((1, 4))],
                           biases=[np.zeros(4), np.zeros(1)])
        assert np.array_equal(symplectic_gradient(params, np.array([0.3, 0.4])),
                              np.zeros(2))

    def test_matches_finite_differences(self, rng):
        params = init_mlp(4, 1, 1, 16)
        for _ in range(20):
            y = rng.uniform(-1, 1, size=2)
            fd = central_gradient(lambda pt: forward(params, pt), y)
            expected = np.array([-fd[1], fd[0]])
            assert rel_err(symplectic_gradient(params, y), expected, floor=1e-7) < 1e-5

    def test_batch_matches_single(self, rng):
        params = init_mlp(4, 1, 1, 16)
        batch = rng.uniform(-1, 1, size=(7, 2))
        got = symplectic_gradient_batch(params, batch)
        for i, y in enumerate(batch):
            assert np.array_equal(got[i], symplectic_gradient(params, y))


class TestBatchedHessian:
    def test_matches_finite_differences_of_gradient(self, rng):
        params = init_mlp(9, 1, 2, 10)
        batch = rng.uniform(-1, 1, size=(5, 2))
        hess = input_hessian_batch(params, batch)
        for i, y in enumerate(batch):
            step = 1e-6
            fd = np.zeros((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = step
                fd[:, j] = (input_gradient(params, y + e)
                            - input_gradient(params, y - e)) / (2 * step)
            assert rel_err(hess[i], 0.5 * (fd + fd.T), floor=1e-8) < 1e-4


class TestFlatPacking:
    def test_round_trip_bit_identical(self, rng):
        params = init_mlp(13, 2, 2, 20)
        flat = params.to_flat()
        back = MlpParams.from_flat(2, 2, 20, flat)
        y = rng.uniform(-1, 1, size=4)
        assert forward(back, y) == forward(params, y)
        for wa, wb in zip(params.weights, back.weights):
            assert np.array_equal(wa, wb)

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionMismatchError):
            MlpParams.from_flat(1, 1, 8, np.zeros(10))


def test_split_join_round_trip(rng):
    y = rng.normal(size=6)
    p, q = split_pq(y)
    assert np.array_equal(join_pq(p, q), y)


def test_symplectic_field_orientation():
    # gradient (dH/dp, dH/dq) = (1, 0) at rest: velocity moves q, not p
    assert np.array_equal(symplectic_field(np.array([1.0, 0.0])), [0.0, 1.0])
    assert np.array_equal(symplectic_field(np.array([0.0, 1.0])), [-1.0, 0.0])
