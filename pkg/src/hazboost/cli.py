"""Command-line interface: simulate, train, cv, predict, evaluate, importance.

Every subcommand is deterministic given its flags, seed, and input files.
Exit codes: 0 success, 1 validation or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import __version__
from .boosting import fit, load_model, predict_survival, save_model
from .data import CATEGORICAL, Column, DataError, Schema, impute_dataset, load_dataset, validate, write_dataset
from .grid import build_grid
from .metrics import (auc_curve, default_time_grid, l2_error, predicted_hazards,
                      sample_evaluation_points)
from .selection import bootstrap_importance, kfold_cv, variable_importance
from .simulation import HazardFamily, SimulationSpec, SimulationTruth, simulate

log = logging.getLogger(__name__)


def _default_threads() -> int:
    env = os.environ.get("HAZBOOST_THREADS")
    if env:
        return int(env)
    return -1  # joblib: all available cores


def _parse_int_list(text: str) -> tuple[int, ...]:
    """Accept '1,2,3' or 'start:stop:step' (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        start, stop, step = parts
        return tuple(range(start, stop + 1, step))
    return tuple(int(v) for v in text.split(","))


def _add_common(sp, seed=False, threads=False):
    sp.add_argument("--verbose", action="store_true", help="log progress with timestamps")
    sp.add_argument("--config", help="key=value file supplying any flag; command line wins")
    if seed:
        sp.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    if threads:
        sp.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker cap for parallel loops; 1 forces serial "
                             "(default: HAZBOOST_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazboost",
                                     description="Boosted hazard estimation for survival data "
                                                 "with time-varying covariates")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw a synthetic benchmark dataset")
    sp.add_argument("--family", required=True,
                    help="lambda1..lambda4 or constant:<level>")
    sp.add_argument("--n", type=int, required=True, help="number of subjects")
    sp.add_argument("--irrelevant", type=int, default=0, help="noise covariate count (default 0)")
    sp.add_argument("--rate", type=float, default=10.0,
                    help="mean covariate jumps per unit time (default 10)")
    sp.add_argument("--censoring", choices=["administrative", "uniform"],
                    default="administrative",
                    help="administrative censoring at the horizon (default) or an "
                         "extra independent uniform censoring time")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.add_argument("--truth", help="write the truth record (JSON) here")
    _add_common(sp, seed=True, threads=True)

    sp = sub.add_parser("train", help="fit a boosted hazard model")
    sp.add_argument("--data", required=True, help="training CSV")
    sp.add_argument("--m", type=int, required=True, help="number of boosting iterations")
    sp.add_argument("--l", type=int, required=True, help="maximum splits per tree")
    sp.add_argument("--nu", type=float, default=0.1, help="learning rate (default 0.1)")
    sp.add_argument("--quantiles", type=int, default=10,
                    help="quantile count for split candidates (default 10)")
    sp.add_argument("--unweighted-quantiles", action="store_true",
                    help="count each epoch value once instead of weighting by duration")
    sp.add_argument("--categorical", help="comma-separated categorical column names")
    sp.add_argument("--dump-grid", action="store_true", help="print the candidate grid")
    sp.add_argument("--out", required=True, help="model file path")
    _add_common(sp)

    sp = sub.add_parser("cv", help="cross-validate (max splits, iterations)")
    sp.add_argument("--data", required=True)
    sp.add_argument("--l", default="1,2,3,4", help="max-split candidates (default 1,2,3,4)")
    sp.add_argument("--m", default="100:300:50",
                    help="iteration candidates, list or start:stop:step (default 100:300:50)")
    sp.add_argument("--k", type=int, default=5, help="number of folds (default 5)")
    sp.add_argument("--nu", type=float, default=0.1)
    sp.add_argument("--quantiles", type=int, default=10)
    sp.add_argument("--unweighted-quantiles", action="store_true")
    sp.add_argument("--categorical", help="comma-separated categorical column names")
    sp.add_argument("--out", help="risk grid CSV (default stdout)")
    _add_common(sp, seed=True, threads=True)

    sp = sub.add_parser("predict", help="hazard along each subject's trajectory")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--survival", action="store_true",
                    help="also emit survival probability at each row time")
    sp.add_argument("--out", help="output CSV (default stdout)")
    _add_common(sp)

    sp = sub.add_parser("evaluate", help="test-set metrics")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="test CSV")
    sp.add_argument("--truth", help="truth JSON from simulate, or a family name")
    sp.add_argument("--metrics", default="l2,auc", help="subset of l2,auc (default both)")
    sp.add_argument("--auc-grid", type=int, default=20,
                    help="AUC time grid size: equally spaced follow-up quantiles (default 20)")
    sp.add_argument("--points-per-subject", type=int, default=1,
                    help="evaluation points drawn per subject for the L2 error (default 1)")
    sp.add_argument("--out", help="output CSV (default stdout)")
    _add_common(sp, seed=True)

    sp = sub.add_parser("importance", help="variable importance scores")
    sp.add_argument("--model", required=True)
    sp.add_argument("--bootstrap", type=int,
                    help="resample count for confidence intervals (requires --data)")
    sp.add_argument("--data", help="training CSV, needed for --bootstrap refits")
    sp.add_argument("--categorical", help="comma-separated categorical column names")
    sp.add_argument("--out", help="output CSV (default stdout)")
    _add_common(sp, seed=True, threads=True)

    return parser


def _inject_config(argv: list[str]) -> list[str]:
    """Expand --config key=value files into flags placed before the command
    line ones, so explicit flags win."""
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if path is None or not argv:
        return argv
    extra: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: bad config line {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if value.lower() in ("true", "1", "yes") and key in (
                    "verbose", "unweighted-quantiles", "dump-grid", "survival"):
                extra.append(f"--{key}")
            else:
                extra.extend([f"--{key}", value])
    return argv[:1] + extra + argv[1:]


def _schema_from_header(path, categorical: str | None) -> Schema | None:
    if not categorical:
        return None
    wanted = {c.strip() for c in categorical.split(",") if c.strip()}
    with open(path, encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    names = [h.strip() for h in header[2:-2]]
    missing = wanted - set(names)
    if missing:
        raise DataError(f"categorical columns not in data: {sorted(missing)}")
    return Schema(tuple(Column(n, CATEGORICAL if n in wanted else "continuous") for n in names))


def _load_for_modelling(path, categorical=None):
    dataset = impute_dataset(load_dataset(path, _schema_from_header(path, categorical)))
    report = validate(dataset)
    if not report.ok:
        print(str(report), file=sys.stderr)
        raise SystemExit(1)
    return dataset


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def _write_rows(path, rows):
    fh = _open_out(path)
    try:
        w = csv.writer(fh)
        for row in rows:
            w.writerow([repr(float(c)) if isinstance(c, float) else c for c in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _cmd_simulate(args) -> int:
    family = HazardFamily.from_name(args.family)
    spec = SimulationSpec(family, args.n, irrelevant=args.irrelevant,
                          jump_rate=args.rate, seed=args.seed, censoring=args.censoring)
    dataset, truth = simulate(spec, threads=args.threads)
    write_dataset(dataset, args.out)
    if args.truth:
        truth.save(args.truth)
    log.info("simulated %d subjects (%d events) to %s", dataset.n, dataset.n_events, args.out)
    return 0


def _cmd_train(args) -> int:
    dataset = _load_for_modelling(args.data, args.categorical)
    grid = build_grid(dataset, num_quantiles=args.quantiles,
                      weighted=not args.unweighted_quantiles)
    if args.dump_grid:
        print(grid.dump())
    model = fit(dataset, args.m, args.l, nu=args.nu, grid=grid)
    save_model(model, args.out)
    log.info("trained %d trees; training risk %s -> %s", model.num_trees,
             model.risk_trace[0], model.risk_trace[-1])
    return 0


def _cmd_cv(args) -> int:
    dataset = _load_for_modelling(args.data, args.categorical)
    report = kfold_cv(dataset, l_values=_parse_int_list(args.l),
                      m_values=_parse_int_list(args.m), k=args.k, nu=args.nu,
                      seed=args.seed, num_quantiles=args.quantiles,
                      weighted_quantiles=not args.unweighted_quantiles,
                      threads=args.threads)
    rows = report.csv_rows()
    rows.append(["selected", report.selected_l, report.selected_m])
    _write_rows(args.out, rows)
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    dataset = _load_for_modelling(args.data)
    if dataset.schema.names != model.schema.names:
        raise DataError(f"data columns {list(dataset.schema.names)} do not match "
                        f"model columns {list(model.schema.names)}")
    header = ["id", "time", "hazard"] + (["survival"] if args.survival else [])
    rows = [header]
    for s in dataset.samples:
        times = np.array([e.start for e in s.epochs])
        values = np.array([e.values for e in s.epochs])
        lam = np.exp(model.predict_log_hazard(times, values))
        for i, e in enumerate(s.epochs):
            row = [s.id, repr(e.start), repr(float(lam[i]))]
            if args.survival:
                row.append(repr(predict_survival(model, s, e.start)))
            rows.append(row)
    _write_rows(args.out, rows)
    return 0


def _resolve_truth(arg: str) -> SimulationTruth | HazardFamily:
    if os.path.exists(arg):
        return SimulationTruth.load(arg)
    return HazardFamily.from_name(arg)


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    dataset = _load_for_modelling(args.data)
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(wanted) - {"l2", "auc"}
    if unknown:
        raise DataError(f"unknown metrics: {sorted(unknown)}")
    truth = _resolve_truth(args.truth) if args.truth else None
    rows = [["metric", "t", "value", "pair_count"]]
    if "l2" in wanted:
        if truth is None:
            raise DataError("l2 needs --truth (simulation truth file or family name)")
        points = sample_evaluation_points(dataset, truth,
                                          per_subject=args.points_per_subject, seed=args.seed)
        err = l2_error(predicted_hazards(model, points), [p.true_hazard for p in points])
        rows.append(["l2", "", repr(err), len(points)])
    if "auc" in wanted:
        grid = default_time_grid(dataset, args.auc_grid)
        log.info("survival past each subject's follow-up uses last observation carried forward")
        for t, auc, pairs in _auc_rows(model, dataset, grid):
            rows.append(["auc", repr(t), auc, pairs])
    _write_rows(args.out, rows)
    return 0


def _auc_rows(model, dataset, grid):
    out = []
    for t in grid:
        try:
            rows = auc_curve(model, dataset, [t])
        except ValueError as exc:
            log.warning(str(exc))
            out.append((float(t), "", 0))
            continue
        out.append((rows[0][0], repr(rows[0][1]), rows[0][2]))
    return out


def _cmd_importance(args) -> int:
    model = load_model(args.model)
    if args.bootstrap:
        if not args.data:
            raise DataError("--bootstrap needs --data to refit resamples")
        dataset = _load_for_modelling(args.data, args.categorical)
        report = bootstrap_importance(dataset, model.max_splits, model.num_trees,
                                      nu=model.nu, b=args.bootstrap, seed=args.seed,
                                      num_quantiles=model.grid.num_quantiles,
                                      weighted_quantiles=model.grid.weighted,
                                      threads=args.threads)
    else:
        report = variable_importance(model)
    _write_rows(args.out, report.csv_rows())
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "cv": _cmd_cv,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "importance": _cmd_importance,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        argv = _inject_config(list(argv))
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )
    try:
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
