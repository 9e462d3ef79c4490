"""End-to-end experiment runner: datasets, training, corrections, metrics.

A config names one system, a list of schemes, a list of step sizes and
seeds; the runner generates the datasets, trains every (scheme, h, seed)
cell, applies the post-training correction to symplectic-Euler models,
measures the average energy error, optionally rolls out trajectories, and
writes everything as CSV files with a JSON summary. Reruns with the same
config are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .correction import LearnedHamiltonian, save_model
from .dataset import Dataset, generate, save as save_dataset
from .evaluation import (EvalReport, error_grid, hamiltonian_error, measure_region,
                         rollout_mse)
from .schemes import Scheme
from .systems import get_system
from .training import TrainConfig, save_report_csv, train

__all__ = ["ExperimentConfig", "ExperimentError", "scale_settings", "run_experiment"]

DESK_EPOCHS = 20_000
DESK_EPOCHS_LARGE = 2_000
PAPER_EPOCHS = 5_000


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class TrainScale:
    depth: int
    width: int
    k: int
    epochs: int


def scale_settings(system: str, h: float, paper_scale: bool) -> TrainScale:
    """Model and dataset sizes per task and step size.

    Paper scale follows the published table; desk scale shrinks the
    one-degree-of-freedom tasks to widths that train in about a minute.
    """
    small = system in ("spring", "pendulum")
    if paper_scale:
        if small:
            if h >= 0.15:
                return TrainScale(1, 200, 2_000, PAPER_EPOCHS)
            if h >= 0.075:
                return TrainScale(2, 200, 4_000, PAPER_EPOCHS)
            return TrainScale(3, 200, 10_000, PAPER_EPOCHS)
        if h >= 0.15:
            return TrainScale(2, 400, 100_000, PAPER_EPOCHS)
        return TrainScale(3, 600, 100_000, PAPER_EPOCHS)
    if small:
        return TrainScale(1, 64, 512, DESK_EPOCHS)
    return TrainScale(2, 128, 10_000, DESK_EPOCHS_LARGE)


@dataclass
class ExperimentConfig:
    system: str
    schemes: list[str]
    h_values: list[float]
    seeds: list[int] = field(default_factory=lambda: [0])
    paper_scale: bool = False
    epochs: int | None = None
    depth: int | None = None
    width: int | None = None
    k: int | None = None
    correct_symplectic_euler: bool = True
    eval_samples: int = 2000
    eval_seed: int = 0
    rollout: bool = False
    rollout_t_final: float | None = None
    rollout_trajectories: int = 50
    write_error_grid: bool = False

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ExperimentError("config", f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**doc)
        except TypeError as err:
            raise ExperimentError("config", str(err)) from None
        cfg.validate()
        return cfg

    def validate(self):
        get_system(self.system)
        for name in self.schemes:
            Scheme.from_name(name)
        if not self.h_values:
            raise ExperimentError("config", "h_values must be non-empty")
        if any(h <= 0 for h in self.h_values):
            raise ExperimentError("config", "h_values must be positive")
        if not self.seeds:
            raise ExperimentError("config", "seeds must be non-empty")

    def resolved_scale(self, h: float) -> TrainScale:
        base = scale_settings(self.system, h, self.paper_scale)
        return TrainScale(
            depth=self.depth or base.depth,
            width=self.width or base.width,
            k=self.k or base.k,
            epochs=self.epochs or base.epochs,
        )


def _float_tag(h: float) -> str:
    return ("%g" % h).replace(".", "p")


def _eval_row(report: EvalReport) -> dict:
    return {"eps_mean": report.mean, "eps_q25": report.q25, "eps_median": report.median,
            "eps_q75": report.q75, "eps_sem": report.sem, "n_samples": report.n_samples}


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Run every cell of the config and write the report bundle."""
    cfg.validate()
    out = Path(out_dir)
    for sub in ("datasets", "models", "losses"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    system = get_system(cfg.system)

    datasets: dict[float, Dataset] = {}
    for h in cfg.h_values:
        scale = cfg.resolved_scale(h)
        try:
            ds = generate(system, h=h, k=scale.k, seed=cfg.seeds[0])
        except Exception as err:
            raise ExperimentError("generate", f"h={h}: {err}") from err
        datasets[h] = ds
        save_dataset(ds, out / "datasets" / f"{cfg.system}_h{_float_tag(h)}.csv")

    loss_rows, eps_rows, rollout_files, grid_files = [], [], [], []
    for scheme_name in cfg.schemes:
        scheme = Scheme.from_name(scheme_name)
        for h in cfg.h_values:
            scale = cfg.resolved_scale(h)
            ds = datasets[h]
            for seed in cfg.seeds:
                tag = f"{cfg.system}_{scheme.value}_h{_float_tag(h)}_seed{seed}"
                train_cfg = TrainConfig(scheme=scheme, epochs=scale.epochs, seed=seed,
                                        depth=scale.depth, width=scale.width)
                try:
                    model, report = train(ds, train_cfg)
                except Exception as err:
                    raise ExperimentError("train", f"{tag}: {err}") from err
                save_model(model, out / "models" / f"{tag}.json")
                save_report_csv(report, out / "losses" / f"{tag}.csv")
                loss_rows.append([cfg.system, scheme.value, h, seed, scale.depth,
                                  scale.width, ds.k, scale.epochs,
                                  report.best_test_loss, report.best_epoch,
                                  float(report.test_loss[-1])])

                variants = [model]
                if scheme is Scheme.SYMPLECTIC_EULER and cfg.correct_symplectic_euler:
                    variants.append(model.with_correction("se_order2"))
                for variant in variants:
                    try:
                        eval_report = hamiltonian_error(
                            variant.as_field(), system,
                            n_samples=cfg.eval_samples, seed=cfg.eval_seed)
                    except Exception as err:
                        raise ExperimentError("evaluate", f"{tag}: {err}") from err
                    eps_rows.append([cfg.system, scheme.value, variant.correction, h,
                                     seed, *(_eval_row(eval_report).values())])

                    if cfg.rollout:
                        t_final = cfg.rollout_t_final or (100.0 if cfg.paper_scale else 20.0)
                        try:
                            roll = rollout_mse(variant, system, t_final=t_final,
                                               n_trajectories=cfg.rollout_trajectories,
                                               seed=cfg.eval_seed)
                        except Exception as err:
                            raise ExperimentError("rollout", f"{tag}: {err}") from err
                        (out / "rollouts").mkdir(exist_ok=True)
                        name = f"rollouts/{tag}_{variant.correction}.csv"
                        _write_csv(out / name, ["t", "mse", "sem"],
                                   [[float(t), float(m), float(s)] for t, m, s in
                                    zip(roll.times, roll.mse, roll.sem)])
                        rollout_files.append(name)

                    if cfg.write_error_grid and system.n_dim == 1:
                        grid = error_grid(variant.as_field(), system)
                        (out / "grids").mkdir(exist_ok=True)
                        name = f"grids/{tag}_{variant.correction}.csv"
                        _write_csv(out / name, ["p", "q", "error"],
                                   [[float(a), float(b), float(c)] for a, b, c in grid])
                        grid_files.append(name)

    _write_csv(out / "losses_summary.csv",
               ["system", "scheme", "h", "seed", "depth", "width", "k", "epochs",
                "best_test_loss", "best_epoch", "final_test_loss"], loss_rows)
    _write_csv(out / "hamiltonian_error.csv",
               ["system", "scheme", "correction", "h", "seed", "eps_mean", "eps_q25",
                "eps_median", "eps_q75", "eps_sem", "n_samples"], eps_rows)

    summary = {
        "version": __version__,
        "config": asdict(cfg),
        "resolved_scales": {str(h): asdict(cfg.resolved_scale(h)) for h in cfg.h_values},
        "measure_region": measure_region(system).tolist(),
        "files": {
            "losses_summary": "losses_summary.csv",
            "hamiltonian_error": "hamiltonian_error.csv",
            "rollouts": rollout_files,
            "error_grids": grid_files,
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary
