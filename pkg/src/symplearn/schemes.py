"""Evaluation-point rules for one-step integration schemes.

Each scheme is identified by where the Hamiltonian vector field is
evaluated between two consecutive snapshots: at the left point (forward
Euler), at the mixed point (new momentum, old position; symplectic Euler),
or at the midpoint (implicit midpoint rule).
"""

from __future__ import annotations

import enum

import numpy as np

__all__ = ["Scheme", "scheme_point"]


class Scheme(enum.Enum):
    FORWARD_EULER = "forward-euler"
    SYMPLECTIC_EULER = "symplectic-euler"
    IMPLICIT_MIDPOINT = "implicit-midpoint"

    @classmethod
    def from_name(cls, name: str) -> "Scheme":
        for scheme in cls:
            if scheme.value == name:
                return scheme
        raise ValueError(f"unknown scheme {name!r}; choose from "
                         f"{[s.value for s in cls]}")

    @property
    def is_symplectic(self) -> bool:
        return self is not Scheme.FORWARD_EULER


def scheme_point(scheme: Scheme, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
    """Where the learned field is evaluated for a snapshot pair.

    Works on single states of shape (2n,) or batches of shape (K, 2n);
    momenta occupy the first n slots.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    if scheme is Scheme.FORWARD_EULER:
        return y0.copy()
    if scheme is Scheme.IMPLICIT_MIDPOINT:
        return 0.5 * (y0 + y1)
    n = y0.shape[-1] // 2
    out = y0.copy()
    out[..., :n] = y1[..., :n]
    return out
