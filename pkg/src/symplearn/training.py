"""Training of the scalar network on snapshot pairs.

The loss compares the finite-difference velocity (y1 - y0)/h of each pair
against the network's symplectic gradient evaluated at the scheme point:
mean over pairs of the squared Euclidean residual. Optimization is plain
full-batch AdamW with decoupled weight decay; the parameters with the best
test loss seen during the run are the ones returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .correction import LearnedHamiltonian
from .dataset import Dataset
from .mlp import MlpParams, batched_output, init_mlp
from .schemes import Scheme, scheme_point

__all__ = ["TrainConfig", "TrainReport", "loss", "loss_for_gradient_field",
           "adamw_step", "train", "save_report_csv"]


@dataclass
class TrainConfig:
    scheme: Scheme
    epochs: int = 5000
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    depth: int = 1
    width: int = 200

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        for name in ("learning_rate", "beta1", "beta2", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


@dataclass
class TrainReport:
    train_loss: np.ndarray
    test_loss: np.ndarray
    best_epoch: int

    @property
    def best_test_loss(self) -> float:
        return float(self.test_loss[self.best_epoch])

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


def _loss_graph(theta: ad.Var, y0: np.ndarray, y1: np.ndarray,
                scheme: Scheme, h: float, n_dim: int, depth: int, width: int) -> ad.Var:
    """Squared-residual loss as a graph node; theta may be a leaf or constant."""
    k = y0.shape[0]
    n = n_dim
    points = ad.leaf(scheme_point(scheme, y0, y1))
    out = ad.vsum(batched_output(theta, points, n_dim, depth, width))
    (g,) = ad.grad(out, [points], create_graph=True)
    velocity = ad.concat([ad.neg(g[:, n:]), g[:, :n]], axis=1)
    residual = ad.constant((y1 - y0) / h) - velocity
    return ad.norm_sq(residual) / k


def loss(params: MlpParams, y0: np.ndarray, y1: np.ndarray,
         scheme: Scheme, h: float) -> float:
    """Mean squared residual of the network field over the given pairs."""
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    if y0.shape[0] == 0:
        raise ValueError("loss needs at least one snapshot pair")
    node = _loss_graph(ad.constant(params.to_flat()), y0, y1, scheme, h,
                       params.n_dim, params.depth, params.width)
    return node.item()


def loss_for_gradient_field(gradient_fn, y0: np.ndarray, y1: np.ndarray,
                            scheme: Scheme, h: float) -> float:
    """Same residual loss for an arbitrary batched energy-gradient field.

    Lets exact reference fields (for instance truncated modified-energy
    series) be pushed through the identical residual convention.
    """
    if y0.shape[0] == 0:
        raise ValueError("loss needs at least one snapshot pair")
    n = y0.shape[1] // 2
    g = np.asarray(gradient_fn(scheme_point(scheme, y0, y1)))
    velocity = np.concatenate([-g[:, n:], g[:, :n]], axis=1)
    residual = (y1 - y0) / h - velocity
    return float(np.mean(np.sum(residual * residual, axis=1)))


def loss_and_gradient(params_flat: np.ndarray, arch: tuple[int, int, int],
                      y0, y1, scheme: Scheme, h: float) -> tuple[float, np.ndarray]:
    theta = ad.leaf(params_flat)
    node = _loss_graph(theta, y0, y1, scheme, h, *arch)
    (g,) = ad.grad(node, [theta])
    return node.item(), g.value


@dataclass
class AdamWState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "AdamWState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adamw_step(theta: np.ndarray, grad: np.ndarray, state: AdamWState,
               cfg: TrainConfig, step_index: int) -> tuple[np.ndarray, AdamWState]:
    """One decoupled-weight-decay Adam update; step_index starts at 1."""
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** step_index)
    v_hat = v / (1.0 - cfg.beta2 ** step_index)
    update = m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta
    return theta - cfg.learning_rate * update, AdamWState(m=m, v=v)


def train(ds: Dataset, cfg: TrainConfig) -> tuple[LearnedHamiltonian, TrainReport]:
    """Full-batch training; returns the parameters of the best test epoch.

    Both losses are recorded at the state each epoch starts from, so the
    checkpoint is exactly the state whose test loss appears in the report.
    """
    cfg.validate()
    half_widths = 0.5 * (np.max(ds.y0, axis=0) - np.min(ds.y0, axis=0))
    half_widths = np.maximum(half_widths, 1e-3)
    params = init_mlp(cfg.seed, ds.n_dim, cfg.depth, cfg.width,
                      coord_half_widths=half_widths)
    arch = (ds.n_dim, cfg.depth, cfg.width)
    y0_tr, y1_tr = ds.train_pairs()
    y0_te, y1_te = ds.test_pairs()
    if y0_tr.shape[0] == 0 or y0_te.shape[0] == 0:
        raise ValueError("both splits must be non-empty")

    theta = params.to_flat()
    state = AdamWState.zeros(theta.size)
    train_hist = np.empty(cfg.epochs)
    test_hist = np.empty(cfg.epochs)
    best_loss, best_theta, best_epoch = np.inf, theta.copy(), 0

    for epoch in range(cfg.epochs):
        train_loss, grad = loss_and_gradient(theta, arch, y0_tr, y1_tr, cfg.scheme, ds.h)
        test_loss = loss(MlpParams.from_flat(ds.n_dim, cfg.depth, cfg.width, theta),
                         y0_te, y1_te, cfg.scheme, ds.h)
        if not (np.isfinite(train_loss) and np.isfinite(test_loss)):
            tail = train_hist[max(0, epoch - 5):epoch]
            raise RuntimeError(
                f"non-finite loss at epoch {epoch} "
                f"(train={train_loss}, test={test_loss}, recent={tail.tolist()})")
        train_hist[epoch] = train_loss
        test_hist[epoch] = test_loss
        if test_loss < best_loss:
            best_loss, best_epoch = test_loss, epoch
            best_theta = theta.copy()
        theta, state = adamw_step(theta, grad, state, cfg, epoch + 1)

    model = LearnedHamiltonian(
        params=MlpParams.from_flat(ds.n_dim, cfg.depth, cfg.width, best_theta),
        scheme=cfg.scheme, h=ds.h, seed=cfg.seed, system=ds.system)
    report = TrainReport(train_loss=train_hist, test_loss=test_hist, best_epoch=best_epoch)
    return model, report


def save_report_csv(report: TrainReport, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("epoch,train_loss,test_loss\n")
        for i in range(report.epochs):
            fh.write(f"{i},{report.train_loss[i]!r},{report.test_loss[i]!r}\n")
