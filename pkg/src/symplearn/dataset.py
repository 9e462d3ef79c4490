"""Snapshot-pair datasets: generation, train/test split, CSV storage.

A dataset holds K pairs (y0, y1) where y0 is drawn uniformly from the
system's data region and y1 is the true state a time h later, integrated
at a tolerance far below every error the experiments measure. Files are
plain CSV with a one-line JSON header; floats are written in shortest
round-trip form so that load(save(ds)) is bit-exact.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrators import IntegrationError, rk45_endpoint
from .systems import HamiltonianSystem, get_system

__all__ = ["Dataset", "DatasetFormatError", "generate", "save", "load",
           "GROUND_TRUTH_TOL", "TEST_FRACTION"]

log = logging.getLogger(__name__)

GROUND_TRUTH_TOL = 1e-10
TEST_FRACTION = 0.2


class DatasetFormatError(ValueError):
    """A dataset file failed validation on load."""


@dataclass
class Dataset:
    system: str
    h: float
    seed: int
    y0: np.ndarray          # (K, 2n)
    y1: np.ndarray          # (K, 2n)
    test_mask: np.ndarray   # (K,) bool
    tolerance: float = GROUND_TRUTH_TOL

    @property
    def k(self) -> int:
        return self.y0.shape[0]

    @property
    def n_dim(self) -> int:
        return self.y0.shape[1] // 2

    def train_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        keep = ~self.test_mask
        return self.y0[keep], self.y1[keep]

    def test_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return self.y0[self.test_mask], self.y1[self.test_mask]


def _split_mask(k: int, rng: np.random.Generator) -> np.ndarray:
    n_test = max(1, int(round(TEST_FRACTION * k)))
    mask = np.zeros(k, dtype=bool)
    mask[rng.permutation(k)[:n_test]] = True
    return mask


def generate(system: HamiltonianSystem, h: float, k: int, seed: int,
             tolerance: float = GROUND_TRUTH_TOL) -> Dataset:
    """Sample K snapshot pairs of the true flow, then assign the 20% split."""
    if k < 5:
        raise ValueError(f"need at least 5 pairs, got {k}")
    if not h > 0:
        raise ValueError(f"time step must be positive, got {h}")
    rng = np.random.default_rng(seed)
    lo, hi = system.data_region[:, 0], system.data_region[:, 1]
    dim = 2 * system.n_dim

    y0 = np.empty((k, dim))
    y1 = np.empty((k, dim))
    failures = 0
    for i in range(k):
        while True:
            candidate = rng.uniform(lo, hi)
            try:
                y1[i] = rk45_endpoint(system.velocity, candidate, h,
                                      rtol=tolerance, atol=tolerance)
            except IntegrationError as err:
                failures += 1
                log.warning("resampling point %d after integration failure: %s", i, err)
                if failures > 0.01 * k:
                    raise RuntimeError(
                        f"more than 1% of samples failed to integrate ({failures} failures)"
                    ) from err
                continue
            y0[i] = candidate
            break

    return Dataset(system=system.name, h=float(h), seed=int(seed),
                   y0=y0, y1=y1, test_mask=_split_mask(k, rng),
                   tolerance=float(tolerance))


def _columns(n: int) -> list[str]:
    cols = ["split_flag"]
    for tag in ("p0", "q0", "p1", "q1"):
        cols += [f"{tag}_{i + 1}" for i in range(n)]
    return cols


def save(ds: Dataset, path) -> None:
    """Write the JSON header line, a column-name line, then one row per pair."""
    path = Path(path)
    n = ds.n_dim
    header = {"system": ds.system, "h": ds.h, "K": ds.k, "seed": ds.seed,
              "tolerance": ds.tolerance}
    with path.open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        fh.write(",".join(_columns(n)) + "\n")
        for i in range(ds.k):
            values = np.concatenate([ds.y0[i, :n], ds.y0[i, n:],
                                     ds.y1[i, :n], ds.y1[i, n:]])
            row = [str(int(ds.test_mask[i]))] + [repr(float(v)) for v in values]
            fh.write(",".join(row) + "\n")


def load(path) -> Dataset:
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: file is empty")
    try:
        header = json.loads(lines[0])
        system, h = header["system"], float(header["h"])
        k, seed = int(header["K"]), int(header["seed"])
        tolerance = float(header.get("tolerance", GROUND_TRUTH_TOL))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise DatasetFormatError(f"{path}: line 1: malformed JSON header ({err})") from None
    body = lines[2:]
    if len(lines) < 2 or len(body) != k:
        raise DatasetFormatError(
            f"{path}: expected {k} data rows per header, found {max(len(lines) - 2, 0)}")
    n_cols = len(lines[1].split(","))
    if (n_cols - 1) % 4 != 0:
        raise DatasetFormatError(f"{path}: line 2: expected 1 + 4n columns, got {n_cols}")
    n = (n_cols - 1) // 4

    y0 = np.empty((k, 2 * n))
    y1 = np.empty((k, 2 * n))
    mask = np.zeros(k, dtype=bool)
    for i, line in enumerate(body):
        lineno = i + 3
        parts = line.split(",")
        if len(parts) != n_cols:
            raise DatasetFormatError(f"{path}: line {lineno}: expected {n_cols} columns, "
                                     f"got {len(parts)}")
        if parts[0] not in ("0", "1"):
            raise DatasetFormatError(f"{path}: line {lineno}: split flag must be 0 or 1")
        mask[i] = parts[0] == "1"
        try:
            values = np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise DatasetFormatError(f"{path}: line {lineno}: unparseable float") from None
        if not np.all(np.isfinite(values)):
            raise DatasetFormatError(f"{path}: line {lineno}: non-finite value")
        y0[i] = np.concatenate([values[:n], values[n:2 * n]])
        y1[i] = np.concatenate([values[2 * n:3 * n], values[3 * n:]])

    return Dataset(system=system, h=h, seed=seed, y0=y0, y1=y1,
                   test_mask=mask, tolerance=tolerance)


def system_of(ds: Dataset) -> HamiltonianSystem:
    return get_system(ds.system)
