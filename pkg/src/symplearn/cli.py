"""Command-line interface.

Subcommands cover the full workflow: generate a dataset, train a model,
tag it with a post-training correction, evaluate the energy error, roll
out trajectories, and run a whole experiment bundle from a config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .correction import LearnedHamiltonian, load_model, save_model
from .dataset import generate, load as load_dataset, save as save_dataset
from .evaluation import hamiltonian_error, rollout_mse
from .experiment import ExperimentConfig, run_experiment
from .schemes import Scheme
from .systems import SYSTEM_NAMES, get_system
from .training import TrainConfig, save_report_csv, train

_CORRECTION_BY_ORDER = {2: "se_order2", 3: "se_order3", 4: "mp_order4"}


def _cmd_generate(args) -> int:
    system = get_system(args.system)
    ds = generate(system, h=args.h, k=args.k, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {ds.k} pairs ({ds.test_mask.sum()} test) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    ds = load_dataset(args.data)
    if args.h is not None and abs(ds.h - args.h) > 1e-12:
        print(f"error: dataset step h={ds.h} conflicts with --h {args.h}", file=sys.stderr)
        return 2
    cfg = TrainConfig(scheme=Scheme.from_name(args.scheme), epochs=args.epochs,
                      seed=args.seed, depth=args.depth, width=args.width,
                      learning_rate=args.lr, weight_decay=args.weight_decay)
    model, report = train(ds, cfg)
    save_model(model, args.out)
    if args.report:
        save_report_csv(report, args.report)
    print(f"best test loss {report.best_test_loss:.6e} at epoch {report.best_epoch}; "
          f"model written to {args.out}")
    return 0


def _cmd_correct(args) -> int:
    model = load_model(args.model)
    tag = _CORRECTION_BY_ORDER[args.order]
    model = model.with_correction(tag)
    save_model(model, args.model)
    print(f"tagged {args.model} with correction {tag}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    system = get_system(args.system or model.system or "")
    report = hamiltonian_error(model.as_field(), system,
                               n_samples=args.n, seed=args.seed)
    doc = {"system": system.name, "model": str(args.model),
           "correction": model.correction, "h": model.h,
           "eps_mean": report.mean, "eps_q25": report.q25,
           "eps_median": report.median, "eps_q75": report.q75,
           "eps_sem": report.sem, "n_samples": report.n_samples, "seed": report.seed}
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_rollout(args) -> int:
    model = load_model(args.model)
    system = get_system(args.system or model.system or "")
    report = rollout_mse(model, system, t_final=args.t_final,
                         n_trajectories=args.n_traj, seed=args.seed)
    with Path(args.out).open("w") as fh:
        fh.write("t,mse,sem\n")
        for t, m, s in zip(report.times, report.mse, report.sem):
            fh.write(f"{float(t)!r},{float(m)!r},{float(s)!r}\n")
    print(f"{report.n_trajectories} trajectories (threshold H < "
          f"{report.energy_threshold:.6g}, {report.n_rejected} rejected) -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.paper_scale:
        cfg.paper_scale = True
    if args.seed is not None:
        cfg.seeds = [args.seed]
    summary = run_experiment(cfg, args.out_dir)
    print(f"report bundle written to {args.out_dir} "
          f"({len(summary['files']['rollouts'])} rollout files)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symplearn",
        description="Learn Hamiltonians from snapshot pairs with symplectic losses.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample snapshot pairs of a benchmark system")
    p.add_argument("--system", required=True, choices=SYSTEM_NAMES)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train a model on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--width", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-2)
    p.add_argument("--h", type=float, default=None,
                   help="optional consistency check against the dataset header")
    p.add_argument("--report", default=None, help="per-epoch loss CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("correct", help="tag a model with a post-training correction")
    p.add_argument("--model", required=True)
    p.add_argument("--order", type=int, required=True, choices=sorted(_CORRECTION_BY_ORDER))
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("evaluate", help="average energy error over the measuring box")
    p.add_argument("--model", required=True)
    p.add_argument("--system", default=None, choices=SYSTEM_NAMES)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("rollout", help="mean squared rollout error against the true flow")
    p.add_argument("--model", required=True)
    p.add_argument("--system", default=None, choices=SYSTEM_NAMES)
    p.add_argument("--t-final", type=float, default=20.0)
    p.add_argument("--n-traj", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("report", help="run a full experiment bundle from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
