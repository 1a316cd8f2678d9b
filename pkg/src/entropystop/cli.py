"""Command-line interface.

Subcommands:
  train    one (dataset, config, mode) run; writes result JSON, trace CSV,
           and a trace figure.
  grid     sweep a hyperparameter grid over one dataset; writes per-run
           rows, a per-mode summary, and a distribution figure.
  inject   generate synthetic benchmark datasets with injected outliers.
  report   compare naive vs entropy runs; writes the comparison table,
           per-dataset details, and a comparison figure.

Config values come from ``--config file.json`` and individual flags override
the file. Set ENTROPYSTOP_THREADS to cap grid parallelism.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys
from dataclasses import fields

from .errors import InvalidInputError, NumericalError
from .harness import (
    PAPER_GRIDS,
    RunConfig,
    build_report,
    grid_summary,
    result_record,
    run_grid,
    run_one,
)
from .plots import plot_auc_distributions, plot_report, plot_trace
from .synth import INJECTION_KINDS, make_synthetic_suite
from .tensor import load_csv, save_csv, standardize
from .training import MODES


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with config fields")
    p.add_argument("--model", choices=["ae", "dsvdd"])
    p.add_argument("--act-func", dest="act_func", choices=["relu", "sigmoid", "leaky_relu", "identity"])
    p.add_argument("--dropout", type=float)
    p.add_argument("--h-dim", dest="h_dim", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--out-dim", dest="out_dim", type=int)
    p.add_argument("--relu-slope", dest="relu_slope", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--n-eval", dest="n_eval", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--r-down", dest="r_down", type=float)
    p.add_argument("--seed", type=int)


def _config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data.update(json.load(fh))
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            data[f.name] = val
    return RunConfig.from_dict(data)


def _load_dataset(args):
    if args.data:
        ds = load_csv(args.data, drop_label_1=getattr(args, "drop_label_1", False))
    elif getattr(args, "synthetic", None):
        spec = dict(kv.split("=", 1) for kv in args.synthetic.split(","))
        datasets, _ = make_synthetic_suite(
            n_datasets=1,
            n=int(spec.get("n", 1000)),
            d=int(spec.get("d", 8)),
            k=int(spec.get("k", 2)),
            kinds=spec.get("kind", "cluster"),
            ratios=float(spec.get("ratio", 0.1)),
            seed=int(spec.get("seed", 0)),
        )
        return datasets[0]
    else:
        raise InvalidInputError("provide --data or --synthetic")
    return standardize(ds)


def _write_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise InvalidInputError("nothing to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    ds = _load_dataset(args)
    os.makedirs(args.out, exist_ok=True)
    try:
        result = run_one(cfg, ds, args.mode)
    except NumericalError as exc:
        stem = os.path.join(args.out, f"run_{cfg.config_hash()}_{args.mode}")
        _dump_partial_trace(exc, stem)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    stem = os.path.join(args.out, f"run_{result.config_hash}_{result.mode}")
    with open(stem + ".json", "w", encoding="utf-8") as fh:
        json.dump(result_record(result, cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    trace = {"train_loss": result.train_loss_trace}
    if result.entropy_trace is not None:
        trace["entropy"] = result.entropy_trace
    if result.auc_trace is not None:
        trace["auc"] = result.auc_trace
        trace["loss_in"] = result.loss_in_trace
        trace["loss_out"] = result.loss_out_trace
    from .entropy import write_trace_csv

    write_trace_csv(stem + "_trace.csv", trace)
    if not args.no_figures:
        plot_trace(result, stem + "_trace.png")
    auc_txt = "n/a" if result.auc is None else f"{result.auc:.4f}"
    print(
        f"{ds.name or args.data}: mode={result.mode} auc={auc_txt} "
        f"selected_iter={result.selected_iter}/{result.total_iters} "
        f"wall={result.wall_time_s:.2f}s -> {stem}.json"
    )
    return 0


def _dump_partial_trace(exc: NumericalError, stem: str) -> None:
    partial = getattr(exc, "partial_result", None)
    if not partial:
        return
    from .entropy import write_trace_csv

    trace = {"train_loss": partial["train_loss_trace"]}
    if partial.get("entropy_trace") is not None:
        trace["entropy"] = partial["entropy_trace"]
    write_trace_csv(stem + "_partial_trace.csv", trace)


def cmd_grid(args) -> int:
    cfg = _config_from_args(args)
    ds = _load_dataset(args)
    if args.grid == "paper":
        grid = PAPER_GRIDS[cfg.model]
    else:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    modes = args.modes.split(",")
    for mode in modes:
        if mode not in MODES:
            raise InvalidInputError(f"unknown mode {mode!r}")
    os.makedirs(args.out, exist_ok=True)
    rows = run_grid(cfg, grid, ds, modes)
    _write_csv(os.path.join(args.out, "grid_results.csv"), rows)
    summary = grid_summary(rows)
    _write_csv(os.path.join(args.out, "grid_summary.csv"), summary)
    if not args.no_figures:
        auc_by_mode = {
            m: [float(r["auc"]) for r in rows if r["mode"] == m and r["auc"] != ""]
            for m in modes
        }
        plot_auc_distributions(
            auc_by_mode,
            os.path.join(args.out, "grid_auc_distribution.png"),
            title=f"AUC across {len(rows) // max(len(modes), 1)} configs on {ds.name}",
        )
    for row in summary:
        print(
            f"mode={row['mode']}: n={row['n_runs']} "
            f"auc_mean={row['auc_mean']} auc_std={row['auc_std']}"
        )
    failures = [r for r in rows if r["error"]]
    if failures:
        print(f"{len(failures)} runs failed; see grid_results.csv", file=sys.stderr)
    return 0


def cmd_inject(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    datasets, manifest = make_synthetic_suite(
        n_datasets=args.count,
        n=args.n,
        d=args.d,
        k=args.gmm_k,
        kinds=args.kind,
        ratios=args.ratio,
        seed=args.seed,
    )
    for ds, entry in zip(datasets, manifest["entries"]):
        path = os.path.join(args.out, f"{ds.name}.csv")
        save_csv(ds, path)
        entry["file"] = os.path.basename(path)
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(datasets)} datasets + manifest.json to {args.out}")
    return 0


def cmd_report(args) -> int:
    paths = []
    for pattern in args.runs:
        if os.path.isdir(pattern):
            paths.extend(sorted(glob.glob(os.path.join(pattern, "*.json"))))
        else:
            paths.extend(sorted(glob.glob(pattern)))
    paths = [p for p in paths if not p.endswith("manifest.json")]
    if not paths:
        raise InvalidInputError("no run records matched")
    records = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            records.append(json.load(fh))
    group_rows, detail_rows = build_report(records)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "report.csv"), group_rows)
    _write_csv(os.path.join(args.out, "report_details.csv"), detail_rows)
    if not args.no_figures:
        plot_report(group_rows, os.path.join(args.out, "report_comparison.png"))
    for row in group_rows:
        print(
            f"{row['group']}: naive={row['naive_auc']:.4f} entropy={row['entropy_auc']:.4f} "
            f"p={row['p_value']} time_ratio={row['time_ratio']}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropystop", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training")
    p_train.add_argument("--data", help="dataset CSV")
    p_train.add_argument("--synthetic", help="key=value spec, e.g. kind=cluster,ratio=0.1,n=1000,d=8,seed=1")
    p_train.add_argument("--mode", choices=list(MODES), default="entropy")
    p_train.add_argument("--out", default="runs")
    p_train.add_argument("--drop-label-1", dest="drop_label_1", action="store_true",
                         help="remove rows labelled 1 before use")
    p_train.add_argument("--no-figures", action="store_true")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_grid = sub.add_parser("grid", help="hyperparameter sweep")
    p_grid.add_argument("--data", help="dataset CSV")
    p_grid.add_argument("--synthetic", help="key=value spec")
    p_grid.add_argument("--grid", default="paper", help="'paper' or a JSON file of field -> values")
    p_grid.add_argument("--modes", default="naive,entropy")
    p_grid.add_argument("--out", default="grid")
    p_grid.add_argument("--drop-label-1", dest="drop_label_1", action="store_true")
    p_grid.add_argument("--no-figures", action="store_true")
    _add_config_flags(p_grid)
    p_grid.set_defaults(func=cmd_grid)

    p_inject = sub.add_parser("inject", help="generate synthetic datasets")
    p_inject.add_argument("--kind", choices=list(INJECTION_KINDS), required=True)
    p_inject.add_argument("--ratio", type=float, required=True)
    p_inject.add_argument("--n", type=int, default=1000, help="inliers per dataset")
    p_inject.add_argument("--d", type=int, default=8)
    p_inject.add_argument("--count", type=int, default=1, help="datasets to generate")
    p_inject.add_argument("--gmm-k", dest="gmm_k", type=int, default=2)
    p_inject.add_argument("--seed", type=int, default=0)
    p_inject.add_argument("--out", default="datasets")
    p_inject.set_defaults(func=cmd_inject)

    p_report = sub.add_parser("report", help="compare naive vs entropy runs")
    p_report.add_argument("--runs", nargs="+", required=True,
                          help="run-record JSON files, globs, or directories")
    p_report.add_argument("--out", default="report")
    p_report.add_argument("--no-figures", action="store_true")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
