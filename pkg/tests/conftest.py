"""Shared test oracles: independent finite-difference derivative estimates."""

import numpy as np
import pytest


def central_gradient(f, y, step=1e-5):
    """Central-difference gradient of a scalar function of a flat vector."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    for i in range(y.size):
        e = np.zeros_like(y)
        e[i] = step
        out[i] = (f(y + e) - f(y - e)) / (2 * step)
    return out


def central_hessian(f, y, step=1e-4):
    """Central-difference Hessian via nested differencing of the values."""
    y = np.asarray(y, dtype=np.float64)
    d = y.size
    out = np.zeros((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = step
        for j in range(d):
            ej = np.zeros(d)
            ej[j] = step
            out[i, j] = (f(y + ei + ej) - f(y + ei - ej)
                         - f(y - ei + ej) + f(y - ei - ej)) / (4 * step * step)
    return out


def central_jacobian(f, y, step=1e-6):
    """Central-difference Jacobian of a vector map."""
    y = np.asarray(y, dtype=np.float64)
    cols = []
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = step
        cols.append((np.asarray(f(y + e)) - np.asarray(f(y - e))) / (2 * step))
    return np.stack(cols, axis=1)


def rel_err(got, want, floor=1e-12):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    return np.max(np.abs(got - want) / np.maximum(np.abs(want), floor))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
