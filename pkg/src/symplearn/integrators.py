"""One-step maps and adaptive integration for ground truth and rollouts.

The three one-step maps mirror the training schemes: explicit Euler, the
(implicit) symplectic Euler method and the implicit midpoint rule. The
implicit solves use plain fixed-point iteration with a damped fallback;
all experiment step sizes are well inside the contraction regime.

Adaptive integration wraps scipy's Dormand-Prince 5(4) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "StepResult",
    "IntegrationError",
    "forward_euler_step",
    "symplectic_euler_step",
    "implicit_midpoint_step",
    "rk45_integrate",
    "rk45_endpoint",
]

VectorField = Callable[[np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """Adaptive integration failed (typically step-size underflow)."""


@dataclass(frozen=True)
class StepResult:
    y_next: np.ndarray
    iterations: int
    converged: bool


def _check_step(h: float):
    if not h > 0:
        raise ValueError(f"time step must be positive, got {h}")


def forward_euler_step(f: VectorField, y: np.ndarray, h: float) -> StepResult:
    """Explicit Euler update y + h f(y)."""
    _check_step(h)
    y = np.asarray(y, dtype=np.float64)
    return StepResult(y + h * np.asarray(f(y)), iterations=0, converged=True)


def _fixed_point(apply_map, x0, tol, max_iter):
    """Iterate x <- F(x) until the residual ||F(x) - x|| drops below tol.

    Halves a damping factor whenever the residual grows, which keeps
    mildly non-contractive cases moving toward the fixed point.
    """
    x = apply_map(x0)
    damping = 1.0
    last_res = np.inf
    for iteration in range(1, max_iter + 1):
        fx = apply_map(x)
        res = float(np.max(np.abs(fx - x)))
        if res <= tol:
            return x, iteration, True
        if res > last_res:
            damping = max(0.5 * damping, 1.0 / 64.0)
        last_res = res
        x = x + damping * (fx - x)
    return x, max_iter, False


def symplectic_euler_step(grad_h: Callable[[np.ndarray], np.ndarray],
                          y: np.ndarray, h: float,
                          tol: float = 1e-12, max_iter: int = 100) -> StepResult:
    """Symplectic Euler update from the energy gradient field.

    Solves p1 = p0 - h dH/dq(p1, q0) by fixed point, then advances
    q1 = q0 + h dH/dp(p1, q0). For separable energies the first update
    already has zero residual.
    """
    _check_step(h)
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0] // 2
    p0, q0 = y[:n], y[n:]

    def update(p):
        return p0 - h * grad_h(np.concatenate([p, q0]))[n:]

    p1, iterations, converged = _fixed_point(update, p0, tol, max_iter)
    q1 = q0 + h * grad_h(np.concatenate([p1, q0]))[:n]
    return StepResult(np.concatenate([p1, q1]), iterations, converged)


def implicit_midpoint_step(f: VectorField, y: np.ndarray, h: float,
                           tol: float = 1e-12, max_iter: int = 100) -> StepResult:
    """Implicit midpoint update y1 = y0 + h f((y0 + y1)/2) by fixed point."""
    _check_step(h)
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    y = np.asarray(y, dtype=np.float64)

    def update(y1):
        return y + h * np.asarray(f(0.5 * (y + y1)))

    y1, iterations, converged = _fixed_point(update, y, tol, max_iter)
    return StepResult(y1, iterations, converged)


def rk45_integrate(f: VectorField, y0: np.ndarray, t_final: float,
                   rtol: float = 1e-10, atol: float = 1e-10,
                   t_eval=None) -> np.ndarray:
    """Integrate an autonomous field with Dormand-Prince 5(4).

    Returns the states at ``t_eval`` (default: just the final time) as an
    array of shape (len(t_eval), dim). Raises :class:`IntegrationError`
    if the adaptive stepper gives up.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    y0 = np.asarray(y0, dtype=np.float64)
    if t_eval is None:
        t_eval = [t_final]
    sol = solve_ivp(lambda _t, y: np.asarray(f(y)), (0.0, float(t_final)), y0,
                    method="RK45", rtol=rtol, atol=atol, t_eval=np.asarray(t_eval))
    if not sol.success:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    return sol.y.T


def rk45_endpoint(f: VectorField, y0: np.ndarray, t_final: float,
                  rtol: float = 1e-10, atol: float = 1e-10) -> np.ndarray:
    """Final state of :func:`rk45_integrate`."""
    return rk45_integrate(f, y0, t_final, rtol=rtol, atol=atol)[-1]
