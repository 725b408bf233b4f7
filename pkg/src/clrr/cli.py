"""Command-line entry point: ``clrr <subcommand> [options]``.

Values come from the built-in defaults, then ``--config FILE``, then
explicit flags.  Every run writes into ``--out`` (default ``clrr-out``):
``report.json``, ``convergence.csv`` and one recovered-matrix file, except
``synth`` which writes the dataset and ``bench`` which writes timings.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .bench import scaling_sweep
from .config import ConfigError, RunConfig, load_config
from .regularizers import (
    LabelVector,
    between_laplacian,
    centering_laplacian,
    custom_constraint,
    knn_laplacian,
    within_laplacian,
)
from .solver import SolverConfig, solve
from .synth import GENERATOR, SynthSpec, dataset_hash, gen_regression, gen_union_subspaces
from . import tasks

log = logging.getLogger("clrr")

SOLVER_FLAGS = {
    "alpha": "alpha",
    "beta": "beta",
    "lam": "lambda",
    "mu0": "mu0",
    "mu_max": "mu-max",
    "rho": "rho",
    "eps": "eps",
    "max_iter": "max-iter",
    "ridge": "ridge",
}


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("solver")
    for dest, flag in SOLVER_FLAGS.items():
        kind = int if dest == "max_iter" else float
        g.add_argument(f"--{flag}", dest=dest, type=kind, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", type=Path, default=None, help="JSON run config")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None,
                   help="skip unit-norm column scaling in the task pipelines")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _add_inputs(p, *names):
    for name in names:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)


def _add_regularizer(p):
    p.add_argument("--regularizer", choices=["within", "between", "knn", "centering", "custom"],
                   default=None)
    p.add_argument("--k-neighbors", type=int, default=None)
    p.add_argument("--l", dest="l_path", default=None, help="custom constraint matrix file")


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="clrr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", parents=[common], help="generate a seeded dataset")
    p.add_argument("--ambient-dim", type=int, default=None)
    p.add_argument("--subspace-dims", type=_int_list, default=None)
    p.add_argument("--samples-per-class", type=_int_list, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--corruption-fraction", type=float, default=None)
    p.add_argument("--corruption-scale", type=float, default=None)
    p.add_argument("--corruption", choices=["column", "entry"], default=None)
    p.add_argument("--coefficient-mean", type=float, default=None)
    p.add_argument("--target-dim", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)

    p = sub.add_parser("solve", parents=[common], help="run the ALM solver on X, Y, L")
    _add_inputs(p, "x", "y", "labels")
    _add_regularizer(p)

    p = sub.add_parser("recover", parents=[common], help="robust recovery X = XZ + E")
    _add_inputs(p, "x", "labels")
    _add_regularizer(p)

    p = sub.add_parser("classify", parents=[common], help="recover, then classify test data")
    _add_inputs(p, "x", "labels", "test_x", "test_labels")
    _add_regularizer(p)
    p.add_argument("--classifier", choices=["nn", "mmd"], default=None)
    p.add_argument("--features", choices=["recovered", "projected"], default=None)
    p.add_argument("--truncate", type=int, default=None)
    p.add_argument("--shrinkage", type=float, default=None)

    p = sub.add_parser("pose", parents=[common], help="regression through the learned projection")
    _add_inputs(p, "x", "targets", "test_x", "test_targets", "labels")
    _add_regularizer(p)

    p = sub.add_parser("bench", parents=[common], help="per-iteration timing sweep over n")
    p.add_argument("--ns", type=_int_list, default=None)
    p.add_argument("--dim", dest="bench_d", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    return parser


def resolve_config(args):
    """Merge defaults, the optional config file and explicit flags."""
    cfg = load_config(args.config) if args.config else RunConfig()
    solver = cfg.solver.to_dict()
    for dest, flag in SOLVER_FLAGS.items():
        v = getattr(args, dest)
        if v is not None:
            solver["lambda" if dest == "lam" else dest] = v
    try:
        cfg.solver = SolverConfig.from_dict(solver)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.seed is not None:
        cfg.seed = args.seed
    if args.normalize is not None:
        cfg.normalize = args.normalize
    if args.out is not None:
        cfg.paths.out = str(args.out)
    for name in ("x", "y", "labels", "test_x", "test_labels", "targets", "test_targets"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg.paths, name, v)
    if getattr(args, "regularizer", None) is not None:
        cfg.regularizer.kind = args.regularizer
    if getattr(args, "k_neighbors", None) is not None:
        cfg.regularizer.k_neighbors = args.k_neighbors
        cfg.pose.k_neighbors = args.k_neighbors
    if getattr(args, "l_path", None) is not None:
        cfg.regularizer.path = args.l_path
        cfg.regularizer.kind = "custom"
    for name in ("classifier", "features", "truncate", "shrinkage"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg.classify, name, v)
    for name in ("ambient_dim", "subspace_dims", "samples_per_class", "noise_sigma",
                 "corruption_fraction", "corruption_scale", "corruption", "coefficient_mean",
                 "target_dim", "test_fraction"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg.synth, name, v)
    for name, attr in (("ns", "ns"), ("bench_d", "d"), ("iterations", "iterations"),
                       ("repeats", "repeats")):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg.bench, attr, v)
    cfg.task = args.command
    return cfg


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg.paths, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigError(f"{cfg.task} needs {flags}")
    return [getattr(cfg.paths, n) for n in names]


def _regularizer_kind(cfg):
    return cfg.regularizer.kind or ("knn" if cfg.task == "pose" else "between")


def _constraint(cfg, x, labels):
    r = cfg.regularizer
    kind = _regularizer_kind(cfg)
    n = x.shape[1]
    if kind == "custom":
        return custom_constraint(io.load_matrix(r.path))
    if kind == "knn":
        return knn_laplacian(x, min(r.k_neighbors, n - 1))
    if kind == "centering":
        return centering_laplacian(n)
    if labels is None:
        raise ConfigError(f"{kind} regularizer needs --labels")
    return within_laplacian(labels) if kind == "within" else between_laplacian(labels)


def _out_dir(cfg):
    out = Path(cfg.paths.out or "clrr-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out, report, extra, recovered, name="recovered.clrrmat"):
    io.save_report(report, out / "report.json", extra=extra, csv_path=out / "convergence.csv")
    io.save_matrix(recovered, out / name)


def cmd_synth(cfg):
    s = cfg.synth
    spec = SynthSpec(
        ambient_dim=s.ambient_dim,
        subspace_dims=tuple(s.subspace_dims),
        samples_per_class=tuple(s.samples_per_class),
        noise_sigma=s.noise_sigma,
        corruption_fraction=s.corruption_fraction,
        corruption_scale=s.corruption_scale,
        seed=cfg.seed,
        corruption=s.corruption,
        coefficient_mean=s.coefficient_mean,
    )
    out = _out_dir(cfg)
    if s.target_dim:
        data = gen_regression(spec, s.target_dim)
        arrays = {"x": data.x, "clean_x": data.clean_x, "targets": data.targets,
                  "planted_map": data.planted_map}
    else:
        data = gen_union_subspaces(spec)
        arrays = {"x": data.x, "clean_x": data.clean_x}
    labels = data.labels.index
    digest = dataset_hash(*arrays.values(), labels)
    for name, arr in arrays.items():
        io.save_matrix(arr, out / f"{name}.clrrmat")
    io.save_labels(labels, out / "labels.txt")
    io.save_labels(data.corrupted_columns, out / "corrupted_columns.txt")
    meta = {"spec": spec.to_dict(), "generator": GENERATOR, "dataset_hash": digest}
    if s.test_fraction:
        n = spec.n
        rng = np.random.Generator(np.random.PCG64([cfg.seed, 1]))
        perm = rng.permutation(n)
        n_test = int(round(s.test_fraction * n))
        test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        for part, idx in (("train", train), ("test", test)):
            io.save_matrix(data.x[:, idx], out / f"{part}_x.clrrmat")
            io.save_labels(labels[idx], out / f"{part}_labels.txt")
            if s.target_dim:
                io.save_matrix(data.targets[:, idx], out / f"{part}_targets.clrrmat")
        meta["split"] = {"train": train.tolist(), "test": test.tolist()}
    io.atomic_write(out / "dataset.json", json.dumps(meta, indent=2) + "\n")
    print(f"dataset_hash {digest}")
    return 0


def _labels_or_none(path):
    return None if path is None else LabelVector.from_labels(io.load_labels(path).tolist())


def cmd_solve(cfg):
    (xp,) = _require(cfg, "x")
    x = io.load_matrix(xp)
    labels = _labels_or_none(cfg.paths.labels)
    if cfg.paths.y is not None:
        y = io.load_matrix(cfg.paths.y)
    elif labels is not None:
        y = labels.indicator()
    elif cfg.solver.beta != 0:
        raise ConfigError("solve needs --y or --labels when beta > 0")
    else:
        y = None
    l = _constraint(cfg, x, labels) if cfg.solver.alpha != 0 else None
    report = solve(x, y, l, cfg.solver)
    out = _out_dir(cfg)
    extra = {"task": "solve", "run": cfg.to_dict()}
    _write_run(out, report, extra, x @ report.final_state.z)
    io.save_matrix(report.final_state.e, out / "error.clrrmat")
    io.save_matrix(report.final_state.p, out / "projection.clrrmat")
    print(f"iterations {report.iterations} converged {str(report.converged).lower()}")
    return 0


def cmd_recover(cfg):
    xp, lp = _require(cfg, "x", "labels")
    x = io.load_matrix(xp)
    labels = _labels_or_none(lp)
    xs = tasks.normalize_columns(x)[0] if cfg.normalize else x
    l = _constraint(cfg, xs, labels)
    run = tasks.recover(x, labels, l, cfg.solver, normalize=cfg.normalize)
    out = _out_dir(cfg)
    extra = {"task": "recover", "run": cfg.to_dict(), "recovery": run.summary()}
    _write_run(out, run.report, extra, run.recovered)
    io.save_matrix(run.error_component, out / "error.clrrmat")
    print(f"iterations {run.report.iterations} converged {str(run.report.converged).lower()}")
    return 0


def cmd_classify(cfg):
    xp, lp, tp = _require(cfg, "x", "labels", "test_x")
    x, test_x = io.load_matrix(xp), io.load_matrix(tp)
    labels = _labels_or_none(lp)
    test_labels = None if cfg.paths.test_labels is None else io.load_labels(cfg.paths.test_labels)
    xs = tasks.normalize_columns(x)[0] if cfg.normalize else x
    l = _constraint(cfg, xs, labels)
    c = cfg.classify
    run = tasks.classify(
        x, labels, test_x, cfg.solver, c.classifier,
        test_labels=None if test_labels is None else test_labels.tolist(),
        l=l, features=c.features, truncate=c.truncate,
        normalize=cfg.normalize, shrinkage=c.shrinkage,
    )
    out = _out_dir(cfg)
    extra = {"task": "classify", "run": cfg.to_dict(), "classification": run.summary()}
    _write_run(out, run.train_report, extra, run.recovered_test, "recovered_test.clrrmat")
    io.save_labels(run.predictions, out / "predictions.txt")
    print(f"error_rate {run.error_rate}")
    return 0


def cmd_pose(cfg):
    xp, yp, tp = _require(cfg, "x", "targets", "test_x")
    x, y, test_x = io.load_matrix(xp), io.load_matrix(yp), io.load_matrix(tp)
    test_y = None if cfg.paths.test_targets is None else io.load_matrix(cfg.paths.test_targets)
    l = None
    if _regularizer_kind(cfg) != "knn" and cfg.solver.alpha != 0:
        xs = tasks.normalize_columns(x)[0] if cfg.normalize else x
        l = _constraint(cfg, xs, _labels_or_none(cfg.paths.labels))
    run = tasks.pose_estimate(
        x, y, test_x, l, cfg.solver, test_targets=test_y,
        normalize=cfg.normalize, k_neighbors=cfg.pose.k_neighbors,
    )
    out = _out_dir(cfg)
    extra = {"task": "pose", "run": cfg.to_dict(), "regression": run.summary()}
    _write_run(out, run.report, extra, run.estimates, "estimates.clrrmat")
    io.save_matrix(run.projection, out / "projection.clrrmat")
    print(f"angle_error {run.angle_error}")
    return 0


def cmd_bench(cfg):
    b = cfg.bench
    res = scaling_sweep(ns=tuple(b.ns), d=b.d, iterations=b.iterations, repeats=b.repeats,
                        seed=cfg.seed)
    out = _out_dir(cfg)
    io.atomic_write(out / "bench.json", json.dumps(res.to_dict(), indent=2) + "\n")
    rows = ["n,seconds_per_iter,predicted_cost,ratio"]
    rows += [f"{p.n},{p.seconds_per_iter!r},{p.predicted_cost!r},{r!r}"
             for p, r in zip(res.points, res.ratios)]
    io.atomic_write(out / "bench.csv", "\n".join(rows) + "\n")
    for p, r in zip(res.points, res.ratios):
        print(f"n {p.n} seconds_per_iter {p.seconds_per_iter:.6f} ratio {r:.3f}")
    print(f"consistent {str(res.consistent).lower()}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "solve": cmd_solve,
    "recover": cmd_recover,
    "classify": cmd_classify,
    "pose": cmd_pose,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, io.MatrixFormatError, io.ReportValidationError, ValueError,
            ArithmeticError, OSError) as exc:
        print(f"clrr: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
