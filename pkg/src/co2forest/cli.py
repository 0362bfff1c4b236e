"""Command-line interface: train, evaluate, grid-search, predict.

Diagnostics go to stderr; results (metrics, predictions) go to stdout or
to the requested output files. Exit code 0 means the command completed;
usage errors exit with 2, runtime failures with 1.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from ._rng import make_rng
from .dataset import (
    LibsvmFormatError,
    apply_preprocess,
    densify_augment,
    fit_preprocess,
    parse_libsvm,
    rebalance_classes,
    subset,
)
from .forest import (
    GridSpec,
    depth_error_curve,
    forest_error_percent,
    forest_predict_batch,
    forest_predict_proba_batch,
    grid_search,
    prefix_error_curve,
    train_forest,
)
from .metrics import confusion_matrix, error_rate, jaccard_class_average, metrics_csv_rows
from .model_io import load_model, save_model
from .stump_co2 import Co2Hyper
from .tree import GrowConfig

_REBALANCE_SALT = 23


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _float_list(text: str) -> tuple:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected a non-empty list")
    return values


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="ascii") as fh:
        return fh.read()


def _load_dataset(path: str, label_map=None, p_raw=None):
    sparse = parse_libsvm(_read_text(path), label_map=label_map)
    return densify_augment(sparse, p_raw=p_raw)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _grow_config(args) -> GrowConfig:
    return GrowConfig(
        stump_trainer=args.trainer,
        max_depth=args.max_depth,
        min_samples_split=args.min_samples_split,
        q=args.q,
        leaf_smoothing=args.smoothing,
        co2=Co2Hyper(
            nu=args.nu,
            eta=args.eta,
            tau=args.tau,
            batch_size=args.batch_size,
            momentum=args.momentum,
            max_cccp_rounds=args.max_cccp_rounds,
        ),
        seed=args.seed,
        collect_traces=getattr(args, "trace_out", None) is not None,
    )


def _add_trainer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trainer", choices=("co2", "axis", "oc1"), default="co2",
                   help="stump trainer (default: co2)")
    p.add_argument("--nu", type=float, default=10.0, help="norm bound on oblique weights")
    p.add_argument("--eta", type=float, default=0.01, help="initial learning rate")
    p.add_argument("--tau", type=_positive_int, default=5, help="epochs per optimization round")
    p.add_argument("--batch-size", type=_positive_int, default=100)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--max-cccp-rounds", type=_positive_int, default=20)
    p.add_argument("--q", type=_positive_int, default=None,
                   help="candidate features per split (default: sqrt of the feature count)")
    p.add_argument("--max-depth", type=_positive_int, default=None,
                   help="depth cap (default: grow until leaves are pure)")
    p.add_argument("--min-samples-split", type=_positive_int, default=2)
    p.add_argument("--smoothing", type=float, default=1.0, help="leaf count smoothing")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preprocess", choices=("zscore", "minmax01", "none"), default="zscore")
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="tree-level parallelism")


def cmd_train(args) -> int:
    d_raw = _load_dataset(args.data)
    stats = None
    d = d_raw
    if args.preprocess != "none":
        stats = fit_preprocess(d_raw, args.preprocess)
        d = apply_preprocess(d_raw, stats)

    class_weights = None
    train_data = d
    if args.rebalance:
        target = args.rebalance_target or max(1, d.n // d.k)
        indices, class_weights = rebalance_classes(
            d, target, make_rng(args.seed, _REBALANCE_SALT)
        )
        train_data = subset(d, indices)
        print(f"rebalanced to {target} examples per class", file=sys.stderr)

    cfg = _grow_config(args)
    forest = train_forest(
        train_data, args.trees, cfg, seed=args.seed, n_jobs=args.threads,
        preprocess=stats, class_weights=class_weights,
    )
    save_model(forest, args.model_out)

    x_raw = d_raw.x[:, :-1]
    err = forest_error_percent(forest, x_raw, d_raw.y)
    print(f"train error: {err:.4f}%")

    if args.trace_out is not None:
        rows = []
        for ti, tree in enumerate(forest.trees):
            for node_id, trace in sorted((tree.traces or {}).items()):
                rows.extend((ti, node_id) + row for row in trace.rows())
        _write_csv(
            args.trace_out,
            ("tree", "node", "round", "surrogate", "empirical", "norm_w", "eta"),
            rows,
        )
    if args.depth_curve_out is not None:
        curve = depth_error_curve(forest, x_raw, d_raw.y, smoothing=args.smoothing)
        _write_csv(args.depth_curve_out, ("depth", "train_error_percent"), curve)
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    d = _load_dataset(args.data, label_map=model.label_map, p_raw=model.p_raw)
    x_raw = d.x[:, :-1]
    pred = forest_predict_batch(model, x_raw)
    cm = confusion_matrix(d.y, pred, model.k)
    print(f"test error: {error_rate(cm):.4f}%")
    print(f"jaccard (class average): {jaccard_class_average(cm):.4f}")
    if args.curve is not None:
        _write_csv(
            args.curve, ("trees", "error_percent"), prefix_error_curve(model, x_raw, d.y)
        )
    if args.metrics_out is not None:
        _write_csv(args.metrics_out, ("metric", "value"), metrics_csv_rows(cm))
    if args.confusion_out is not None:
        _write_csv(args.confusion_out, [f"pred_{c}" for c in range(model.k)], cm.tolist())
    return 0


def cmd_grid_search(args) -> int:
    d = _load_dataset(args.data)
    stats = None
    if args.preprocess != "none":
        stats = fit_preprocess(d, args.preprocess)
        d = apply_preprocess(d, stats)
    val = None
    if args.val_data is not None:
        sparse = parse_libsvm(_read_text(args.val_data), label_map=d.label_map)
        val = densify_augment(sparse, p_raw=d.p_raw)
        if stats is not None:
            val = apply_preprocess(val, stats)

    grid = GridSpec(
        nu_set=args.nu_set,
        eta_set=args.eta_set,
        q_exponents=args.q_exponents,
        validation_trees=args.validation_trees,
    )
    cfg = _grow_config(args)
    result = grid_search(
        d, val, grid, cfg, seed=args.seed, n_jobs=args.threads, val_fraction=args.val_fraction
    )
    for q, err in result.q_rows:
        print(f"q={q}: validation error {err:.4f}%", file=sys.stderr)
    print(f"best: nu={result.best_nu} eta={result.best_eta} q={result.best_q}")
    if args.table_out is not None:
        _write_csv(args.table_out, ("nu", "eta", "q", "val_error"), result.rows)
    return 0


def _parse_feature_lines(text: str, p_raw: int) -> np.ndarray:
    """Raw feature rows from LIBSVM-style lines; a leading label is optional."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        if tokens and ":" not in tokens[0]:
            tokens = tokens[1:]
        row = np.zeros(p_raw)
        prev = 0
        for tok in tokens:
            idx_s, sep, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                sep = ""
            if not sep:
                raise LibsvmFormatError(f"line {lineno}: bad feature {tok!r}")
            if idx <= prev:
                raise LibsvmFormatError(f"line {lineno}: feature indices must increase")
            if idx > p_raw:
                raise LibsvmFormatError(
                    f"line {lineno}: feature index {idx} exceeds model dimension {p_raw}"
                )
            row[idx - 1] = val
            prev = idx
        rows.append(row)
    return np.asarray(rows).reshape(len(rows), p_raw)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    x_raw = _parse_feature_lines(_read_text(args.data), model.p_raw)
    if x_raw.shape[0] == 0:
        return 0
    if args.proba:
        proba = forest_predict_proba_batch(model, x_raw)
        for row in proba:
            print(" ".join(repr(float(v)) for v in row))
    else:
        for ci in forest_predict_batch(model, x_raw):
            print(model.label_map[ci])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="co2forest",
        description="Oblique decision forests trained by continuous optimization, "
        "with axis-aligned and OC1-style baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest on a LIBSVM file")
    p.add_argument("--data", required=True, help="LIBSVM training file")
    p.add_argument("--model-out", required=True)
    p.add_argument("--trees", type=_positive_int, default=30)
    _add_trainer_flags(p)
    _add_common_flags(p)
    p.add_argument("--rebalance", action="store_true",
                   help="resample to equal class counts; weights undo it at test time")
    p.add_argument("--rebalance-target", type=_positive_int, default=None,
                   help="examples per class after rebalancing (default: n / k)")
    p.add_argument("--trace-out", default=None, help="CSV of per-node optimizer traces")
    p.add_argument("--depth-curve-out", default=None,
                   help="CSV of training error vs tree depth")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a LIBSVM file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--curve", default=None, help="CSV of test error vs ensemble-prefix size")
    p.add_argument("--metrics-out", default=None)
    p.add_argument("--confusion-out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid-search", help="two-stage (q, then nu/eta) validation")
    p.add_argument("--data", required=True)
    p.add_argument("--val-data", default=None, help="explicit validation file")
    p.add_argument("--val-fraction", type=float, default=0.2,
                   help="holdout fraction when --val-data is absent")
    p.add_argument("--nu-set", type=_float_list, default=(0.1, 1.0, 4.0, 10.0, 43.0, 100.0))
    p.add_argument("--eta-set", type=_float_list, default=(0.03, 0.01, 0.003))
    p.add_argument("--q-exponents", type=_float_list, default=(0.5, 0.6, 0.7, 0.8, 0.9))
    p.add_argument("--validation-trees", type=_positive_int, default=30)
    p.add_argument("--table-out", default=None)
    _add_trainer_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("predict", help="stream predictions for feature lines")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default="-", help="LIBSVM lines (label optional); '-' for stdin")
    p.add_argument("--proba", action="store_true", help="print class distributions")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LibsvmFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def app() -> None:
    raise SystemExit(main())
