"""File-mediated pipeline CLI: train -> unwrap -> diagnose -> merge -> flatten.

Each stage reads and writes plain JSON/CSV artifacts, so any step can be
rerun or inspected in isolation. Every command writes a run manifest with
input/output hashes; primary outputs are byte-identical across reruns with
the same seed and inputs.

Exit codes: 0 success, 2 input error, 3 numeric failure, 4 infeasible
configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, gen_balanced_default, gen_cocircles, group_split, load_dataset, write_dataset_csv
from .diagnose import Standardizer, coefficient_matrix, feature_importance, profile
from .docio import canonical_dumps, read_json, sha256_of_file, write_text_atomic
from .errors import InfeasibleError, InputError, NumericError, StaleIndexError
from .metrics import accuracy, auc
from .network import NetworkSpec, fingerprint, forward_batch, load_network, save_network
from .simplify import flatten, merge_regions, merged_table, merged_to_document, merged_from_document, predict_merged_batch
from .train import TrainConfig, l1_sweep, sweep_csv, train
from .unwrap import region_table, region_table_csv, regionset_from_document, regionset_to_document, unwrap

SPLIT_NAMES = ("train", "val", "test")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _default_seed() -> int:
    return int(os.environ.get("RELULENS_SEED", "0"))


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    write_text_atomic(path, text)
    return path


def _write_manifest(args, command: str, inputs, outputs, seed, started: str) -> None:
    out_dir = Path(args.out_dir)
    doc = {
        "tool": "relulens",
        "version": __version__,
        "command": command,
        "argv": list(args._argv),
        "seed": seed,
        "started": started,
        "finished": _now(),
        "inputs": {str(p): sha256_of_file(p) for p in inputs},
        "outputs": [{"path": p.name, "sha256": sha256_of_file(p)} for p in outputs],
    }
    _write(out_dir, f"{command}_manifest.json", canonical_dumps(doc))


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise InputError(f"could not parse {text!r} as comma-separated numbers") from exc


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise InputError(f"could not parse {text!r} as comma-separated integers") from exc


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        hidden=_parse_ints(args.hidden),
        l1_lambda=args.l1,
        learning_rate=args.lr,
        lr_decay=args.lr_decay,
        batch_size=args.batch,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )


def _split_dataset(ds: Dataset, fractions, seed: int):
    """Group-aware 3-way split; rows become their own groups when ungrouped."""
    groups = ds.group_ids if ds.group_ids is not None else np.arange(ds.n)
    return group_split(groups, fractions=fractions, seed=seed)


def _select_rows(ds: Dataset, args) -> tuple[np.ndarray, str]:
    """Row indices selected by --splits/--use-split; defaults to all rows."""
    if getattr(args, "splits", None) is None:
        return np.arange(ds.n), "all"
    doc = read_json(args.splits)
    name = args.use_split
    if name not in doc:
        raise InputError(f"splits file {args.splits} has no split named {name!r}")
    rows = np.asarray(doc[name], dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= ds.n):
        raise InputError(f"split {name!r} indexes rows outside the dataset")
    return rows, name


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    ds = load_dataset(args.data)
    fractions = _parse_floats(args.fractions)
    if len(fractions) != 3:
        raise InputError(f"--fractions needs three values, got {fractions}")
    idx_train, idx_val, idx_test = _split_dataset(ds, fractions, args.seed)
    config = _train_config(args)
    net = train(config, ds.X[idx_train], ds.y[idx_train], ds.X[idx_val], ds.y[idx_val])

    metrics = {}
    for name, idx in zip(SPLIT_NAMES, (idx_train, idx_val, idx_test)):
        logits, _ = forward_batch(net, ds.X[idx])
        metrics[name] = {
            "auc": auc(logits, ds.y[idx]),
            "accuracy": accuracy(logits, ds.y[idx]),
        }

    outputs = [
        _write(out_dir, "model.json", canonical_dumps(save_network(net))),
        _write(out_dir, "metrics.json", canonical_dumps(metrics)),
        _write(
            out_dir,
            "splits.json",
            canonical_dumps(
                {
                    "seed": args.seed,
                    "fractions": fractions,
                    "train": idx_train.tolist(),
                    "val": idx_val.tolist(),
                    "test": idx_test.tolist(),
                }
            ),
        ),
    ]
    _write_manifest(args, "train", [args.data], outputs, args.seed, started)


def cmd_unwrap(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    net = load_network(read_json(args.model))
    ds = load_dataset(args.data)
    rows, split_label = _select_rows(ds, args)
    regionset = unwrap(net, ds.X[rows])
    table = region_table(regionset, ds.X[rows], ds.y[rows], top=args.top)
    doc = regionset_to_document(
        regionset,
        include_indices=not args.no_indices,
        meta={"source": str(args.data), "split": split_label},
    )
    outputs = [
        _write(out_dir, "regions.json", canonical_dumps(doc)),
        _write(out_dir, "region_table.csv", region_table_csv(table)),
    ]
    inputs = [args.model, args.data] + ([args.splits] if args.splits else [])
    _write_manifest(args, "unwrap", inputs, outputs, None, started)


def _check_alignment(regionset, rows, what: str) -> None:
    if regionset.n_samples != rows.shape[0]:
        raise InputError(
            f"{what} indexes {regionset.n_samples} samples but the selected data "
            f"slice has {rows.shape[0]} rows; pass the same --splits/--use-split "
            "used at unwrap time"
        )


def cmd_diagnose(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    regionset = regionset_from_document(read_json(args.regions))
    ds = load_dataset(args.data)
    rows, _ = _select_rows(ds, args)
    _check_alignment(regionset, rows, f"region set {args.regions}")
    X = ds.X[rows]
    do_all = not (args.importance or args.pcplot or args.profile is not None)
    outputs = []

    if args.importance or do_all:
        report = feature_importance(regionset, X)
        order = np.argsort(report.ranks)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "score", "rank"])
        for j in order:
            writer.writerow([ds.feature_names[j], repr(float(report.scores[j])), int(report.ranks[j])])
        outputs.append(_write(out_dir, "importance.csv", buf.getvalue()))
        outputs.append(
            _write(
                out_dir,
                "importance.json",
                canonical_dumps(
                    {
                        "features": ds.feature_names,
                        "scores": report.scores.tolist(),
                        "ranks": report.ranks.tolist(),
                        "region_weights": report.region_weights.tolist(),
                        "coefficients": report.coefficients.tolist(),
                    }
                ),
            )
        )
        if args.svg:
            from .plots import importance_plot

            svg = out_dir / "importance.svg"
            importance_plot(report, ds.feature_names, svg)
            outputs.append(svg)

    if args.pcplot or do_all:
        standardizer = Standardizer.from_data(X)
        matrix = coefficient_matrix(regionset, standardizer)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["region_id"] + ds.feature_names + ["intercept"])
        for rid, row in enumerate(matrix):
            writer.writerow([rid] + [repr(float(v)) for v in row])
        outputs.append(_write(out_dir, "pc_matrix.csv", buf.getvalue()))
        if args.svg:
            from .plots import pc_plot

            svg = out_dir / "pc_plot.svg"
            weights = [r.count for r in regionset.regions]
            pc_plot(matrix, ds.feature_names, svg, weights=weights)
            outputs.append(svg)

    if args.profile is not None:
        j = ds.feature_index(args.profile)
        name = ds.feature_names[j]
        segments = profile(regionset, X, j)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["region_id", "feature", "lo", "hi", "slope", "intercept", "weight"])
        for seg in segments:
            writer.writerow(
                [seg.region_id, name, repr(seg.lo), repr(seg.hi), repr(seg.slope), repr(seg.intercept), seg.weight]
            )
        outputs.append(_write(out_dir, f"profile_{name}.csv", buf.getvalue()))
        if args.svg:
            from .plots import profile_plot

            svg = out_dir / f"profile_{name}.svg"
            profile_plot(segments, svg, feature_name=name)
            outputs.append(svg)

    inputs = [args.regions, args.data] + ([args.splits] if args.splits else [])
    _write_manifest(args, "diagnose", inputs, outputs, None, started)


def cmd_merge(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    net = load_network(read_json(args.model))
    regionset = regionset_from_document(read_json(args.regions))
    if fingerprint(net) != regionset.net_fingerprint:
        raise StaleIndexError(
            f"region set {args.regions} was not built from model {args.model}"
        )
    ds = load_dataset(args.data)
    rows, _ = _select_rows(ds, args)
    _check_alignment(regionset, rows, f"region set {args.regions}")
    merged = merge_regions(regionset, ds.X[rows], ds.y[rows], k=args.k, C=args.c, seed=args.seed)
    table = merged_table(merged, ds.X[rows], ds.y[rows])
    outputs = [
        _write(out_dir, "merged.json", canonical_dumps(merged_to_document(merged))),
        _write(out_dir, "merged_table.csv", region_table_csv(table)),
    ]
    inputs = [args.model, args.regions, args.data] + ([args.splits] if args.splits else [])
    _write_manifest(args, "merge", inputs, outputs, args.seed, started)


def cmd_flatten(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    merged = merged_from_document(read_json(args.merged))
    net = load_network(read_json(args.model))
    if fingerprint(net) != merged.net_fingerprint:
        raise StaleIndexError(
            f"merged model {args.merged} was not built from model {args.model}"
        )
    ds = load_dataset(args.data)

    if args.splits is not None:
        doc = read_json(args.splits)
        idx_fit = np.asarray(doc["train"], dtype=np.int64)
        eval_splits = {
            "train_auc": np.asarray(doc["train"], dtype=np.int64),
            "test_auc": np.asarray(doc["test"], dtype=np.int64),
        }
    else:
        idx_fit = np.arange(ds.n)
        eval_splits = {"train_auc": idx_fit, "test_auc": None}

    flnet = flatten(merged, ds.X[idx_fit], ds.y[idx_fit], C=args.c)

    def _scores(model: str, X):
        if model == "relu_net":
            return forward_batch(net, X)[0]
        if model == "merge_net":
            return predict_merged_batch(merged, net, X)[0]
        return forward_batch(flnet, X)[0]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "train_auc", "test_auc"])
    for model in ("relu_net", "merge_net", "fl_net"):
        row = [model]
        for column in ("train_auc", "test_auc"):
            idx = eval_splits[column]
            if idx is None:
                row.append("")
            else:
                row.append(repr(auc(_scores(model, ds.X[idx]), ds.y[idx])))
        writer.writerow(row)

    outputs = [
        _write(out_dir, "flnet.json", canonical_dumps(save_network(flnet))),
        _write(out_dir, "comparison.csv", buf.getvalue()),
    ]
    inputs = [args.merged, args.model, args.data] + ([args.splits] if args.splits else [])
    _write_manifest(args, "flatten", inputs, outputs, None, started)


def cmd_sweep(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    lambdas = _parse_floats(args.lambdas)
    if len(lambdas) < 2:
        raise InputError(f"--lambdas needs at least two values, got {lambdas}")
    ds = load_dataset(args.data)
    fractions = _parse_floats(args.fractions)
    if len(fractions) != 3:
        raise InputError(f"--fractions needs three values, got {fractions}")
    idx_train, idx_val, idx_test = _split_dataset(ds, fractions, args.seed)
    config = _train_config(args)
    rows = l1_sweep(
        config,
        lambdas,
        ds.X[idx_train],
        ds.y[idx_train],
        ds.X[idx_val],
        ds.y[idx_val],
        ds.X[idx_test],
        ds.y[idx_test],
    )
    outputs = [_write(out_dir, "sweep.csv", sweep_csv(rows))]
    _write_manifest(args, "sweep", [args.data], outputs, args.seed, started)


def cmd_gen(args) -> None:
    started = _now()
    out_dir = Path(args.out_dir)
    if args.dataset == "cocircles":
        X, y = gen_cocircles(n=args.n, noise_sd=args.noise, factor=args.factor, seed=args.seed)
        group_ids = None
        names = ["x0", "x1"]
    else:
        X, y, group_ids = gen_balanced_default(n=args.n, d=args.d, seed=args.seed)
        names = ["risk_up", "risk_down", "horizon"] + [f"noise{j}" for j in range(args.d - 3)]
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / args.output
    write_dataset_csv(path, X, y, feature_names=names, group_ids=group_ids)
    _write_manifest(args, "gen", [], [path], args.seed, started)


# ---------------------------------------------------------------------------
# parser


def _add_common(sub):
    sub.add_argument("--out-dir", default=".", help="directory for output artifacts")
    sub.add_argument("--seed", type=int, default=_default_seed(),
                     help="random seed (default: RELULENS_SEED env var or 0)")


def _add_train_flags(sub):
    sub.add_argument("--hidden", default="5,5", help="hidden widths, e.g. 5,5")
    sub.add_argument("--l1", type=float, default=0.0, help="l1 penalty on weights")
    sub.add_argument("--lr", type=float, default=0.25, help="initial SGD step size")
    sub.add_argument("--lr-decay", type=float, default=0.002, help="inverse-time step decay rate")
    sub.add_argument("--batch", type=int, default=64, help="mini-batch size")
    sub.add_argument("--epochs", type=int, default=200, help="max epochs")
    sub.add_argument("--patience", type=int, default=20, help="early-stop patience on val AUC")
    sub.add_argument("--fractions", default="0.6,0.2,0.2", help="train,val,test fractions")


def _add_split_selector(sub):
    sub.add_argument("--splits", default=None, help="splits.json produced by train")
    sub.add_argument("--use-split", default="train", choices=SPLIT_NAMES,
                     help="which split to operate on when --splits is given")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relulens",
        description="Unwrap ReLU networks into exact local linear models; "
        "diagnose, merge, and flatten them.",
    )
    parser.add_argument("--version", action="version", version=f"relulens {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("train", help="train a ReLU net on a dataset CSV")
    p.add_argument("data", help="dataset CSV (features + y [+ group_id])")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("unwrap", help="partition data into regions with exact LLMs")
    p.add_argument("model", help="model.json from train")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--top", type=int, default=None, help="truncate the table to top-k regions")
    p.add_argument("--no-indices", action="store_true", help="omit sample indices from regions.json")
    _add_split_selector(p)
    _add_common(p)
    p.set_defaults(func=cmd_unwrap)

    p = commands.add_parser("diagnose", help="importance, PC matrix, and profiles")
    p.add_argument("regions", help="regions.json from unwrap")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--importance", action="store_true", help="emit feature importance")
    p.add_argument("--pcplot", action="store_true", help="emit the coefficient matrix")
    p.add_argument("--profile", default=None, metavar="FEATURE",
                   help="emit the local linear profile of one feature (name or index)")
    p.add_argument("--svg", action="store_true", help="also render SVG plots")
    _add_split_selector(p)
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = commands.add_parser("merge", help="merge regions into K refitted local models")
    p.add_argument("model", help="model.json from train")
    p.add_argument("regions", help="regions.json from unwrap")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--k", type=int, required=True, help="number of merged regions")
    p.add_argument("--c", type=float, default=0.1, help="logistic regularization parameter")
    _add_split_selector(p)
    _add_common(p)
    p.set_defaults(func=cmd_merge)

    p = commands.add_parser("flatten", help="convert a merged model to a one-hidden-layer net")
    p.add_argument("merged", help="merged.json from merge")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--model", required=True, help="model.json the merge was built from")
    p.add_argument("--c", type=float, default=None,
                   help="output-layer regularization (default: the merge's C)")
    p.add_argument("--splits", default=None, help="splits.json for train/test comparison rows")
    _add_common(p)
    p.set_defaults(func=cmd_flatten)

    p = commands.add_parser("sweep", help="train across an l1 ladder and count regions")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--lambdas", required=True, help="comma-separated l1 values (at least two)")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = commands.add_parser("gen", help="write a synthetic dataset CSV")
    p.add_argument("dataset", choices=["cocircles", "balanced-default"])
    p.add_argument("--output", "-o", default="data.csv", help="output CSV name")
    p.add_argument("--n", type=int, default=2000, help="number of rows")
    p.add_argument("--noise", type=float, default=0.1, help="cocircles: Gaussian noise sd")
    p.add_argument("--factor", type=float, default=0.5, help="cocircles: inner radius")
    p.add_argument("--d", type=int, default=8, help="balanced-default: feature count")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    try:
        args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
