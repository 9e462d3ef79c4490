"""Ground-truth Hamiltonian systems and their data regions.

Three nondimensionalized benchmark systems: the harmonic oscillator, the
ideal pendulum and the planar double pendulum. Each carries the analytic
energy function, its analytic gradient, and the axis-aligned box the
training data is drawn from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mlp import symplectic_field

__all__ = [
    "HamiltonianSystem",
    "spring",
    "pendulum",
    "double_pendulum",
    "get_system",
    "exact_flow_spring",
    "SYSTEM_NAMES",
]


@dataclass(frozen=True)
class HamiltonianSystem:
    """Analytic Hamiltonian, gradient and sampling box for one task.

    ``hamiltonian`` and ``gradient`` accept single states of shape (2n,)
    or batches (K, 2n). ``data_region`` is a (2n, 2) array of per-axis
    lower/upper bounds. ``hessian`` is optional; fields that need second
    derivatives fall back to differencing the analytic gradient.
    """

    name: str
    n_dim: int
    hamiltonian: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    data_region: np.ndarray = field(repr=False)
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def velocity(self, y: np.ndarray) -> np.ndarray:
        """Phase-space velocity (-dH/dq, dH/dp) of the true dynamics."""
        return symplectic_field(self.gradient(y))


def _spring_h(y):
    p, q = y[..., 0], y[..., 1]
    return 0.5 * p * p + 0.5 * q * q


def _spring_grad(y):
    return np.array(y, dtype=np.float64, copy=True)


def _spring_hess(y):
    y = np.asarray(y, dtype=np.float64)
    return np.broadcast_to(np.eye(2), y.shape[:-1] + (2, 2)).copy()


def spring() -> HamiltonianSystem:
    """Harmonic oscillator: H = p^2/2 + q^2/2 on [-1, 1]^2."""
    region = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    return HamiltonianSystem("spring", 1, _spring_h, _spring_grad, region, _spring_hess)


def _pendulum_h(y):
    p, q = y[..., 0], y[..., 1]
    return 0.5 * p * p + (1.0 - np.cos(q))


def _pendulum_grad(y):
    out = np.empty_like(np.asarray(y, dtype=np.float64))
    out[..., 0] = y[..., 0]
    out[..., 1] = np.sin(y[..., 1])
    return out


def _pendulum_hess(y):
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(y.shape[:-1] + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = np.cos(y[..., 1])
    return out


def pendulum() -> HamiltonianSystem:
    """Ideal pendulum: H = p^2/2 + (1 - cos q) on [-pi, pi]^2."""
    region = np.array([[-np.pi, np.pi], [-np.pi, np.pi]])
    return HamiltonianSystem("pendulum", 1, _pendulum_h, _pendulum_grad, region,
                             _pendulum_hess)


def _double_pendulum_h(y):
    p1, p2, q1, q2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    u = q1 - q2
    denom = 1.0 + np.sin(u) ** 2
    kinetic = (0.5 * p1 * p1 + p2 * p2 - p1 * p2 * np.cos(u)) / denom
    return kinetic - 2.0 * np.cos(q1) - np.cos(q2)


def _double_pendulum_grad(y):
    y = np.asarray(y, dtype=np.float64)
    p1, p2, q1, q2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    u = q1 - q2
    sin_u, cos_u = np.sin(u), np.cos(u)
    denom = 1.0 + sin_u ** 2
    numer = 0.5 * p1 * p1 + p2 * p2 - p1 * p2 * cos_u
    # d/du of the kinetic term via the quotient rule
    dk_du = (p1 * p2 * sin_u * denom - numer * 2.0 * sin_u * cos_u) / denom ** 2
    out = np.empty_like(y)
    out[..., 0] = (p1 - p2 * cos_u) / denom
    out[..., 1] = (2.0 * p2 - p1 * cos_u) / denom
    out[..., 2] = dk_du + 2.0 * np.sin(q1)
    out[..., 3] = -dk_du + np.sin(q2)
    return out


def double_pendulum() -> HamiltonianSystem:
    """Equal-mass, equal-length planar double pendulum on [-pi, pi]^4."""
    region = np.array([[-np.pi, np.pi]] * 4)
    return HamiltonianSystem("double_pendulum", 2,
                             _double_pendulum_h, _double_pendulum_grad, region)


_FACTORIES = {
    "spring": spring,
    "pendulum": pendulum,
    "double_pendulum": double_pendulum,
}

SYSTEM_NAMES = tuple(_FACTORIES)


def get_system(name: str) -> HamiltonianSystem:
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {SYSTEM_NAMES}") from None


def exact_flow_spring(y0: np.ndarray, t: float) -> np.ndarray:
    """Closed-form harmonic-oscillator flow: rotation by angle t.

    Used as an exact reference in integrator and dataset tests.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    p, q = y0[..., 0], y0[..., 1]
    c, s = np.cos(t), np.sin(t)
    out = np.empty_like(y0)
    out[..., 0] = p * c - q * s
    out[..., 1] = q * c + p * s
    return out
