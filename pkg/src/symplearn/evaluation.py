"""Metrics for learned energies: average error, rollouts, order fits.

The average-error metric compares a learned scalar field against the true
Hamiltonian over a shrunken measuring box, after removing the mean
difference (the constant a gradient-trained network can never pin down).
Rollout quality is the mean squared trajectory error against the true
flow, restricted to initial states without enough energy to leave the
data region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correction import LearnedHamiltonian, ScalarField
from .integrators import rk45_integrate
from .systems import HamiltonianSystem

__all__ = [
    "EvalReport",
    "RolloutReport",
    "measure_region",
    "sample_box",
    "hamiltonian_error",
    "boundary_energy_min",
    "rollout_mse",
    "order_fit",
    "plateau_exponent",
    "error_grid",
]

ROLLOUT_TOL = 1e-9


def measure_region(system: HamiltonianSystem) -> np.ndarray:
    """Measuring box: same center as the data box, side lengths / sqrt(2)."""
    region = system.data_region
    center = 0.5 * (region[:, 0] + region[:, 1])
    half = 0.5 * (region[:, 1] - region[:, 0]) / np.sqrt(2.0)
    return np.stack([center - half, center + half], axis=1)


def sample_box(box: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(box[:, 0], box[:, 1], size=(count, box.shape[0]))


@dataclass(frozen=True)
class EvalReport:
    """Statistics of |F - H - mean(F - H)| over the measuring box."""

    mean: float
    q25: float
    median: float
    q75: float
    sem: float
    n_samples: int
    seed: int


def hamiltonian_error(field: ScalarField, system: HamiltonianSystem,
                      n_samples: int = 2000, seed: int = 0) -> EvalReport:
    """Average error of a learned energy, constant offset removed.

    Draws uniform samples from the measuring box, subtracts the mean of
    F - H over those samples, and reports mean, quartiles and standard
    error of the absolute deviations.
    """
    if n_samples < 10:
        raise ValueError("need at least 10 samples")
    rng = np.random.default_rng(seed)
    points = sample_box(measure_region(system), n_samples, rng)
    diff = np.asarray(field.value(points)) - system.hamiltonian(points)
    dev = np.abs(diff - np.mean(diff))
    q25, median, q75 = np.percentile(dev, [25.0, 50.0, 75.0])
    return EvalReport(mean=float(np.mean(dev)), q25=float(q25), median=float(median),
                      q75=float(q75), sem=float(np.std(dev, ddof=1) / np.sqrt(n_samples)),
                      n_samples=n_samples, seed=seed)


def boundary_energy_min(system: HamiltonianSystem) -> float:
    """Minimum of H over the data-region boundary, by dense grid search.

    10^4 points per face for one-degree-of-freedom systems, 32 points per
    free axis otherwise.
    """
    region = system.data_region
    dim = region.shape[0]
    per_axis = 10_000 if dim == 2 else 32
    best = np.inf
    for axis in range(dim):
        for bound in region[axis]:
            axes = [np.linspace(region[a, 0], region[a, 1], per_axis)
                    if a != axis else np.array([bound]) for a in range(dim)]
            mesh = np.meshgrid(*axes, indexing="ij")
            points = np.stack([m.ravel() for m in mesh], axis=1)
            best = min(best, float(np.min(system.hamiltonian(points))))
    return best


@dataclass(frozen=True)
class RolloutReport:
    times: np.ndarray
    mse: np.ndarray
    sem: np.ndarray
    n_trajectories: int
    energy_threshold: float
    n_rejected: int


def rollout_mse(model: LearnedHamiltonian | ScalarField, system: HamiltonianSystem,
                t_final: float, n_trajectories: int = 50, seed: int = 0,
                dt: float | None = None,
                rtol: float = ROLLOUT_TOL, atol: float = ROLLOUT_TOL) -> RolloutReport:
    """Mean squared state error of model rollouts against the true flow.

    Initial states are drawn from the measuring box and kept only when
    their energy is below the minimum of H on the data-region boundary,
    so no trajectory can leave the region the model was trained on.
    """
    if isinstance(model, LearnedHamiltonian):
        field_velocity = model.velocity_field()
        if dt is None:
            dt = model.h
    else:
        field_velocity = model.velocity
        if dt is None:
            raise ValueError("dt is required when passing a bare field")

    threshold = boundary_energy_min(system)
    rng = np.random.default_rng(seed)
    box = measure_region(system)
    accepted = []
    rejected = 0
    max_draws = max(200 * n_trajectories, 2000)
    drawn = 0
    while len(accepted) < n_trajectories:
        if drawn >= max_draws:
            raise RuntimeError(
                f"rejected {rejected}/{drawn} initial states; the measuring box "
                "does not fit inside the boundary energy threshold")
        candidates = sample_box(box, n_trajectories, rng)
        drawn += len(candidates)
        keep = system.hamiltonian(candidates) < threshold
        rejected += int(np.sum(~keep))
        accepted.extend(candidates[keep])
        if drawn >= 10 * n_trajectories and rejected > 0.9 * drawn:
            raise RuntimeError(
                f"rejection rate {rejected}/{drawn} exceeds 90%; "
                "region and energy threshold are incompatible")
    starts = np.array(accepted[:n_trajectories])

    times = np.arange(0.0, t_final + 0.5 * dt, dt)
    times[0] = 0.0
    sq_errors = np.empty((n_trajectories, len(times)))
    eval_times = times[1:] if len(times) > 1 else times
    for i, y0 in enumerate(starts):
        if len(times) == 1:
            sq_errors[i] = 0.0
            continue
        true_traj = rk45_integrate(system.velocity, y0, times[-1],
                                   rtol=rtol, atol=atol, t_eval=eval_times)
        model_traj = rk45_integrate(field_velocity, y0, times[-1],
                                    rtol=rtol, atol=atol, t_eval=eval_times)
        diff = model_traj - true_traj
        sq_errors[i, 0] = 0.0
        sq_errors[i, 1:] = np.sum(diff * diff, axis=1)

    return RolloutReport(times=times, mse=np.mean(sq_errors, axis=0),
                         sem=np.std(sq_errors, axis=0, ddof=1) / np.sqrt(n_trajectories),
                         n_trajectories=n_trajectories,
                         energy_threshold=threshold, n_rejected=rejected)


def order_fit(h_values, eps_values) -> tuple[float, float]:
    """Least-squares slope and intercept of log(eps) against log(h)."""
    h_values = np.asarray(h_values, dtype=np.float64)
    eps_values = np.asarray(eps_values, dtype=np.float64)
    if h_values.size < 3:
        raise ValueError("order fit needs at least 3 points")
    if np.any(h_values <= 0) or np.any(eps_values <= 0):
        raise ValueError("order fit needs strictly positive values")
    slope, intercept = np.polyfit(np.log(h_values), np.log(eps_values), 1)
    return float(slope), float(intercept)


def plateau_exponent(h_values, best_losses) -> float:
    """Log-log slope of the best test loss against the step size."""
    slope, _ = order_fit(h_values, best_losses)
    return slope


def error_grid(field: ScalarField, system: HamiltonianSystem,
               points_per_axis: int = 101) -> np.ndarray:
    """Offset-removed error F - H - mean on a grid over the data region.

    One-degree-of-freedom systems only; returns rows (p, q, error).
    """
    if system.n_dim != 1:
        raise ValueError("error grids are defined for n=1 systems")
    region = system.data_region
    p = np.linspace(region[0, 0], region[0, 1], points_per_axis)
    q = np.linspace(region[1, 0], region[1, 1], points_per_axis)
    mesh_p, mesh_q = np.meshgrid(p, q, indexing="ij")
    points = np.stack([mesh_p.ravel(), mesh_q.ravel()], axis=1)
    diff = np.asarray(field.value(points)) - system.hamiltonian(points)
    diff -= np.mean(diff)
    return np.column_stack([points, diff])
