"""Series corrections between the learned energy and the true one.

A network trained through a symplectic scheme converges to a modified
energy function whose expansion in the step size is known. The functions
here move along that expansion in both directions:

* ``correct_se_order2`` / ``correct_se_order3`` / ``correct_mp_order4``
  subtract the leading modification terms from a trained field, recovering
  the true energy to higher order;
* ``forward_series`` builds the truncated modified energy from a known
  Hamiltonian, which is the training-free way to check the expansion;
* ``mixed_derivative_mismatch`` evaluates the curl obstruction that rules
  out an exact learnable energy for the explicit Euler scheme.

All formulas act on :class:`ScalarField` objects, a uniform wrapper over
analytic Hamiltonians and trained networks that exposes values, gradients
and Hessians on batches of phase-space points.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .mlp import MlpParams, forward_batch, input_gradient_batch, input_hessian_batch, \
    symplectic_field
from .schemes import Scheme
from .systems import HamiltonianSystem

__all__ = [
    "ScalarField",
    "CallableField",
    "AnalyticField",
    "NetworkField",
    "CorrectedField",
    "SeriesField",
    "LearnedHamiltonian",
    "correct_se_order2",
    "correct_se_order3",
    "correct_mp_order4",
    "forward_series",
    "mixed_derivative_mismatch",
    "save_model",
    "load_model",
    "CORRECTION_TAGS",
]

_FD_STEP = 1e-6


def _atleast_batch(y: np.ndarray) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        return y[None, :], True
    return y, False


class ScalarField:
    """Scalar function on phase space with gradient and Hessian access.

    Subclasses implement the batched ``value``; ``gradient`` and
    ``hessian`` default to central finite differences, exact
    implementations override them. Points are arrays of shape (K, 2n);
    the ``*_at`` helpers accept a single state.
    """

    n_dim: int

    def value(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, Y: np.ndarray) -> np.ndarray:
        return _fd_gradient(self.value, Y)

    def hessian(self, Y: np.ndarray) -> np.ndarray:
        return _fd_jacobian(self.gradient, Y)

    def value_at(self, y) -> float:
        return float(self.value(np.asarray(y, dtype=np.float64)[None, :])[0])

    def gradient_at(self, y) -> np.ndarray:
        return self.gradient(np.asarray(y, dtype=np.float64)[None, :])[0]

    def hessian_at(self, y) -> np.ndarray:
        return self.hessian(np.asarray(y, dtype=np.float64)[None, :])[0]

    def velocity(self, y: np.ndarray) -> np.ndarray:
        """Symplectic gradient (-dF/dq, dF/dp), single state or batch."""
        Y, single = _atleast_batch(y)
        out = symplectic_field(self.gradient(Y))
        return out[0] if single else out


def _fd_gradient(value_fn, Y: np.ndarray, step: float = _FD_STEP) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    out = np.empty_like(Y)
    for j in range(Y.shape[1]):
        shift = np.zeros(Y.shape[1])
        shift[j] = step
        out[:, j] = (value_fn(Y + shift) - value_fn(Y - shift)) / (2 * step)
    return out


def _fd_jacobian(grad_fn, Y: np.ndarray, step: float = _FD_STEP) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    d = Y.shape[1]
    rows = []
    for j in range(d):
        shift = np.zeros(d)
        shift[j] = step
        rows.append((grad_fn(Y + shift) - grad_fn(Y - shift)) / (2 * step))
    jac = np.stack(rows, axis=1)
    return 0.5 * (jac + np.transpose(jac, (0, 2, 1)))


class CallableField(ScalarField):
    """Wrap plain batched callables as a scalar field."""

    def __init__(self, n_dim: int, value_fn: Callable,
                 gradient_fn: Callable | None = None,
                 hessian_fn: Callable | None = None):
        self.n_dim = n_dim
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self._hessian_fn = hessian_fn

    def value(self, Y):
        return np.asarray(self._value_fn(np.asarray(Y, dtype=np.float64)))

    def gradient(self, Y):
        if self._gradient_fn is None:
            return super().gradient(Y)
        return np.asarray(self._gradient_fn(np.asarray(Y, dtype=np.float64)))

    def hessian(self, Y):
        if self._hessian_fn is None:
            return super().hessian(Y)
        return np.asarray(self._hessian_fn(np.asarray(Y, dtype=np.float64)))


class AnalyticField(CallableField):
    """The true Hamiltonian of a benchmark system as a scalar field."""

    def __init__(self, system: HamiltonianSystem):
        super().__init__(system.n_dim, system.hamiltonian, system.gradient,
                         system.hessian)
        self.system_name = system.name


class NetworkField(ScalarField):
    """A trained network as a scalar field with exact derivatives."""

    def __init__(self, params: MlpParams):
        self.params = params
        self.n_dim = params.n_dim

    def value(self, Y):
        return forward_batch(self.params, Y)

    def gradient(self, Y):
        return input_gradient_batch(self.params, Y)

    def hessian(self, Y):
        return input_hessian_batch(self.params, Y)


# -- correction formulas ----------------------------------------------------


def _se_first_order_term(field: ScalarField, Y: np.ndarray) -> np.ndarray:
    n = field.n_dim
    g = field.gradient(Y)
    return np.sum(g[:, :n] * g[:, n:], axis=1)


def correct_se_order2(field: ScalarField, y, h: float):
    """First-order correction for symplectic-Euler-trained fields:
    F - (h/2) dF/dp . dF/dq."""
    Y, single = _atleast_batch(y)
    out = field.value(Y) - 0.5 * h * _se_first_order_term(field, Y)
    return float(out[0]) if single else out


def _se_second_order_term(field: ScalarField, Y: np.ndarray) -> np.ndarray:
    n = field.n_dim
    g = field.gradient(Y)
    hess = field.hessian(Y)
    gp, gq = g[:, :n], g[:, n:]
    h_pp = hess[:, :n, :n]
    h_pq = hess[:, :n, n:]
    h_qq = hess[:, n:, n:]
    quad_pp = np.einsum("kij,ki,kj->k", h_pp, gq, gq)
    cross = np.einsum("kij,ki,kj->k", h_pq, gp, gq)
    quad_qq = np.einsum("kij,ki,kj->k", h_qq, gp, gp)
    return quad_pp + 4.0 * cross + quad_qq


def correct_se_order3(field: ScalarField, y, h: float):
    """Second-order correction for symplectic-Euler-trained fields.

    Adds (h^2/12) (F_pp(F_q, F_q) + 4 F_pq(F_p, F_q) + F_qq(F_p, F_p))
    on top of the first-order correction.
    """
    Y, single = _atleast_batch(y)
    out = (field.value(Y)
           - 0.5 * h * _se_first_order_term(field, Y)
           + (h * h / 12.0) * _se_second_order_term(field, Y))
    return float(out[0]) if single else out


def _mp_term(field: ScalarField, Y: np.ndarray) -> np.ndarray:
    g = field.gradient(Y)
    hess = field.hessian(Y)
    f = symplectic_field(g)
    return np.einsum("kij,ki,kj->k", hess, f, f)


def correct_mp_order4(field: ScalarField, y, h: float):
    """Correction for midpoint-trained fields: F - (h^2/24) F''(JgF, JgF).

    The exact formula contracts the Hessian with the true velocity field;
    using the field's own symplectic gradient instead shifts the result
    only at the next order in h.
    """
    Y, single = _atleast_batch(y)
    out = field.value(Y) - (h * h / 24.0) * _mp_term(field, Y)
    return float(out[0]) if single else out


def forward_series(field: ScalarField, scheme: Scheme, order: int, y, h: float):
    """Truncated modified energy built from a known Hamiltonian.

    Symplectic Euler supports order 1 (H + (h/2) H_p . H_q); the midpoint
    rule supports order 2 (H + (h^2/24) H''(JgH, JgH)). These are the
    energies the corresponding training schemes actually converge to,
    up to the next power of h.
    """
    Y, single = _atleast_batch(y)
    if scheme is Scheme.SYMPLECTIC_EULER and order == 1:
        out = field.value(Y) + 0.5 * h * _se_first_order_term(field, Y)
    elif scheme is Scheme.IMPLICIT_MIDPOINT and order == 2:
        out = field.value(Y) + (h * h / 24.0) * _mp_term(field, Y)
    else:
        raise ValueError(
            f"unsupported series: scheme={scheme.value}, order={order}; "
            "supported are (symplectic-euler, 1) and (implicit-midpoint, 2)")
    return float(out[0]) if single else out


def mixed_derivative_mismatch(field: ScalarField, y) -> float:
    """Leading coefficient of the curl obstruction for explicit Euler, n=1:
    -F_pp F_qq + F_qp F_pq."""
    if field.n_dim != 1:
        raise ValueError("mixed-derivative mismatch is defined for n=1 systems")
    hess = field.hessian_at(np.asarray(y, dtype=np.float64))
    return float(-hess[0, 0] * hess[1, 1] + hess[0, 1] * hess[1, 0])


class CorrectedField(ScalarField):
    """A base field composed with one of the correction formulas.

    Values are exact compositions. Gradients are exact (through the base
    Hessian) for the first-order correction; the higher-order corrections
    would need third derivatives of the base field, so their gradients
    fall back to central differences of the corrected value.
    """

    def __init__(self, base: ScalarField, correction: str, h: float):
        if correction not in CORRECTION_TAGS:
            raise ValueError(f"unknown correction tag {correction!r}")
        self.base = base
        self.correction = correction
        self.h = float(h)
        self.n_dim = base.n_dim

    def value(self, Y):
        Y = np.asarray(Y, dtype=np.float64)
        if self.correction == "none":
            return self.base.value(Y)
        if self.correction == "se_order2":
            return correct_se_order2(self.base, Y, self.h)
        if self.correction == "se_order3":
            return correct_se_order3(self.base, Y, self.h)
        return correct_mp_order4(self.base, Y, self.h)

    def gradient(self, Y):
        Y = np.asarray(Y, dtype=np.float64)
        if self.correction == "none":
            return self.base.gradient(Y)
        if self.correction == "se_order2":
            n = self.n_dim
            g = self.base.gradient(Y)
            hess = self.base.hessian(Y)
            gp, gq = g[:, :n], g[:, n:]
            bilinear = (np.einsum("kij,kj->ki", hess[:, :, :n], gq)
                        + np.einsum("kij,kj->ki", hess[:, :, n:], gp))
            return g - 0.5 * self.h * bilinear
        return _fd_gradient(self.value, Y)


class SeriesField(ScalarField):
    """Truncated modified energy of a known Hamiltonian as a field.

    The first-order series has an exact gradient (through the base
    Hessian); the midpoint series gradient would need third derivatives
    and falls back to central differences.
    """

    def __init__(self, base: ScalarField, scheme: Scheme, order: int, h: float):
        self.base = base
        self.scheme = scheme
        self.order = order
        self.h = float(h)
        self.n_dim = base.n_dim

    def value(self, Y):
        return forward_series(self.base, self.scheme, self.order, Y, self.h)

    def gradient(self, Y):
        if self.scheme is Scheme.SYMPLECTIC_EULER and self.order == 1:
            n = self.n_dim
            g = self.base.gradient(Y)
            hess = self.base.hessian(Y)
            gp, gq = g[:, :n], g[:, n:]
            bilinear = (np.einsum("kij,kj->ki", hess[:, :, :n], gq)
                        + np.einsum("kij,kj->ki", hess[:, :, n:], gp))
            return g + 0.5 * self.h * bilinear
        return _fd_gradient(self.value, Y)


# -- trained model container ------------------------------------------------

CORRECTION_TAGS = ("none", "se_order2", "se_order3", "mp_order4")

_CORRECTION_SCHEMES = {
    "se_order2": Scheme.SYMPLECTIC_EULER,
    "se_order3": Scheme.SYMPLECTIC_EULER,
    "mp_order4": Scheme.IMPLICIT_MIDPOINT,
}


@dataclass
class LearnedHamiltonian:
    """A trained network together with its scheme, step and correction tag."""

    params: MlpParams
    scheme: Scheme
    h: float
    correction: str = "none"
    seed: int | None = None
    system: str | None = None

    def validate(self):
        self.params.validate()
        if self.correction not in CORRECTION_TAGS:
            raise ValueError(f"unknown correction tag {self.correction!r}")
        wanted = _CORRECTION_SCHEMES.get(self.correction)
        if wanted is not None and self.scheme is not wanted:
            raise ValueError(
                f"correction {self.correction!r} requires the {wanted.value} scheme, "
                f"model was trained with {self.scheme.value}")

    def with_correction(self, correction: str) -> "LearnedHamiltonian":
        model = LearnedHamiltonian(params=self.params, scheme=self.scheme, h=self.h,
                                   correction=correction, seed=self.seed,
                                   system=self.system)
        model.validate()
        return model

    def as_field(self) -> ScalarField:
        """The (possibly corrected) learned energy as a scalar field."""
        self.validate()
        base = NetworkField(self.params)
        if self.correction == "none":
            return base
        return CorrectedField(base, self.correction, self.h)

    def velocity_field(self) -> Callable[[np.ndarray], np.ndarray]:
        """Phase-space velocity used for rollouts of this model."""
        field = self.as_field()
        return field.velocity


def save_model(model: LearnedHamiltonian, path) -> None:
    """One JSON file: architecture metadata plus base64 float64 parameters."""
    model.validate()
    flat = model.params.to_flat()
    blob = base64.b64encode(flat.astype("<f8").tobytes()).decode("ascii")
    doc = {
        "format": "symplearn-model-v1",
        "n_dim": model.params.n_dim,
        "depth": model.params.depth,
        "width": model.params.width,
        "scheme": model.scheme.value,
        "h": model.h,
        "seed": model.seed,
        "system": model.system,
        "correction": model.correction,
        "params_base64": blob,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> LearnedHamiltonian:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "symplearn-model-v1":
        raise ValueError(f"{path}: not a symplearn model file")
    flat = np.frombuffer(base64.b64decode(doc["params_base64"]), dtype="<f8")
    params = MlpParams.from_flat(int(doc["n_dim"]), int(doc["depth"]),
                                 int(doc["width"]), np.array(flat, dtype=np.float64))
    model = LearnedHamiltonian(params=params,
                               scheme=Scheme.from_name(doc["scheme"]),
                               h=float(doc["h"]),
                               correction=doc.get("correction", "none"),
                               seed=doc.get("seed"),
                               system=doc.get("system"))
    model.validate()
    return model
