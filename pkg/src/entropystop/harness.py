"""Run orchestration: configs, single runs, grid sweeps, and reports.

A run is fully determined by (dataset, RunConfig, mode); the config hash in
every emitted file is the sha256 of the canonical config JSON (mode
excluded, seed included), so naive/entropy runs of the same config pair up
by (dataset, hash).
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import itertools
import json
import os
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import InvalidInputError, NumericalError
from .metrics import wilcoxon_one_sided
from .models import build_model
from .nn import OptimizerConfig
from .stopper import StopperConfig
from .tensor import Dataset, RngStream
from .training import RunResult, TrainConfig, run_training

THREADS_ENV = "ENTROPYSTOP_THREADS"

# Grid used for the published sweep protocol: 64 autoencoder configs and a
# 16-config embedding-model counterpart.
PAPER_GRIDS = {
    "ae": {
        "act_func": ["relu", "sigmoid"],
        "dropout": [0.0, 0.2],
        "h_dim": [64, 256],
        "lr": [0.005, 0.001],
        "layers": [2, 4],
        "epochs": [100, 500],
    },
    "dsvdd": {
        "relu_slope": [0.1, 0.001],
        "epochs": [100, 250],
        "lr": [1e-4, 1e-3],
        "weight_decay": [1e-5, 1e-6],
    },
}


@dataclass(frozen=True)
class RunConfig:
    """One model + training + stopping configuration."""

    model: str = "ae"
    act_func: str = "relu"
    dropout: float = 0.2
    h_dim: int = 64
    layers: int = 2
    out_dim: int = 16
    relu_slope: float = 0.1
    optimizer: str = "adam"
    lr: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 250
    batch_size: int = 256
    n_eval: int = 1024
    k: int = 100
    r_down: float = 0.1
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def train_config(self) -> TrainConfig:
        opt = OptimizerConfig(kind=self.optimizer, lr=self.lr, weight_decay=self.weight_decay)
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=opt,
            n_eval=self.n_eval,
        )

    def stopper_config(self) -> StopperConfig:
        return StopperConfig(k=self.k, r_down=self.r_down)


def run_one(cfg: RunConfig, ds: Dataset, mode: str) -> RunResult:
    """Build the model from the config seed and execute one training run."""
    rng = RngStream(cfg.seed)
    model = build_model(
        cfg.model,
        ds.d,
        rng.derive(0),
        h_dim=cfg.h_dim,
        layers=cfg.layers,
        act_func=cfg.act_func,
        dropout=cfg.dropout,
        out_dim=cfg.out_dim,
        relu_slope=cfg.relu_slope,
    )
    result = run_training(model, ds, cfg.train_config(), cfg.stopper_config(), rng.derive(1), mode)
    result.config_hash = cfg.config_hash()
    result.seed = cfg.seed
    result.dataset = ds.name
    return result


def expand_grid(base: RunConfig, grid: dict) -> list[RunConfig]:
    """Cartesian product of HP value lists applied over a base config.

    Each config's seed derives from the base seed and its position, so runs
    stay reproducible however the sweep is scheduled.
    """
    known = {f.name for f in fields(RunConfig)}
    unknown = set(grid) - known
    if unknown:
        raise InvalidInputError(f"unknown grid fields: {sorted(unknown)}")
    names = sorted(grid)
    configs = []
    for i, combo in enumerate(itertools.product(*(grid[n] for n in names))):
        updates = dict(zip(names, combo))
        updates["seed"] = base.seed + i
        configs.append(replace(base, **updates))
    return configs


def sweep_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if raw.strip():
        try:
            cap = int(raw)
        except ValueError:
            raise InvalidInputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if cap < 1:
            raise InvalidInputError(f"{THREADS_ENV} must be >= 1")
        return cap
    return min(4, os.cpu_count() or 1)


def run_grid(base: RunConfig, grid: dict, ds: Dataset, modes: list[str]) -> list[dict]:
    """Run every config x mode; failures become rows, not crashes.

    Rows come back sorted by (config hash, mode) so the output is identical
    no matter how the parallel executor schedules the work.
    """
    configs = expand_grid(base, grid)
    jobs = [(cfg, mode) for cfg in configs for mode in modes]

    def one(job):
        cfg, mode = job
        row = {"config_hash": cfg.config_hash(), "mode": mode, "dataset": ds.name}
        row.update(cfg.to_dict())
        try:
            res = run_one(cfg, ds, mode)
            row.update(
                auc="" if res.auc is None else res.auc,
                selected_iter=res.selected_iter,
                total_iters=res.total_iters,
                wall_time_s=res.wall_time_s,
                error="",
            )
        except (NumericalError, InvalidInputError) as exc:
            row.update(auc="", selected_iter="", total_iters="", wall_time_s="", error=str(exc))
        return row

    with concurrent.futures.ThreadPoolExecutor(max_workers=sweep_workers()) as pool:
        rows = list(pool.map(one, jobs))
    rows.sort(key=lambda r: (r["config_hash"], r["mode"]))
    return rows


def grid_summary(rows: list[dict]) -> list[dict]:
    """Per-mode AUC mean/std over successful rows."""
    out = []
    for mode in sorted({r["mode"] for r in rows}):
        aucs = [float(r["auc"]) for r in rows if r["mode"] == mode and r["auc"] != ""]
        out.append(
            {
                "mode": mode,
                "n_runs": len(aucs),
                "auc_mean": float(np.mean(aucs)) if aucs else "",
                "auc_std": float(np.std(aucs)) if aucs else "",
            }
        )
    return out


def result_record(result: RunResult, cfg: RunConfig, include_scores: bool = True) -> dict:
    """JSON-serializable record of a finished run."""
    rec = {
        "mode": result.mode,
        "dataset": result.dataset,
        "model": cfg.model,
        "config": cfg.to_dict(),
        "config_hash": result.config_hash,
        "seed": result.seed,
        "auc": result.auc,
        "selected_iter": result.selected_iter,
        "total_iters": result.total_iters,
        "wall_time_s": result.wall_time_s,
    }
    if include_scores:
        rec["scores"] = [float(s) for s in result.scores]
    return rec


def build_report(records: list[dict]) -> tuple[list[dict], list[dict]]:
    """Aggregate run records into per-model-kind comparison rows.

    Needs naive and entropy records covering the same dataset set per model
    kind; raises InvalidInput otherwise. Returns (group_rows, detail_rows).
    The one-sided Wilcoxon tests entropy > naive over per-dataset mean AUC;
    an all-zero difference vector is reported as p = "n/a" rather than a
    failure. Time ratio is the mean over paired configs of entropy wall time
    over naive wall time.
    """
    by_kind: dict[str, list[dict]] = {}
    for rec in records:
        if rec.get("mode") not in ("naive", "entropy"):
            continue
        by_kind.setdefault(rec.get("model", "?"), []).append(rec)
    if not by_kind:
        raise InvalidInputError("no naive/entropy records to report on")
    group_rows, detail_rows = [], []
    for kind in sorted(by_kind):
        recs = by_kind[kind]
        naive = [r for r in recs if r["mode"] == "naive"]
        entropy = [r for r in recs if r["mode"] == "entropy"]
        ds_naive = {r["dataset"] for r in naive}
        ds_entropy = {r["dataset"] for r in entropy}
        if not naive or not entropy:
            raise InvalidInputError(f"model {kind}: need both naive and entropy records")
        if ds_naive != ds_entropy:
            raise InvalidInputError(
                f"model {kind}: dataset sets differ between modes "
                f"({sorted(ds_naive ^ ds_entropy)})"
            )
        datasets = sorted(ds_naive)
        naive_means, entropy_means = [], []
        for ds in datasets:
            naive_means.append(float(np.mean([r["auc"] for r in naive if r["dataset"] == ds])))
            entropy_means.append(float(np.mean([r["auc"] for r in entropy if r["dataset"] == ds])))
        try:
            p_value = wilcoxon_one_sided(entropy_means, naive_means).p_value
        except InvalidInputError:
            p_value = "n/a"
        ratios = _paired_time_ratios(naive, entropy)
        time_ratio = float(np.mean(ratios)) if ratios else ""
        group_rows.append(
            {
                "group": kind,
                "model": kind,
                "n_datasets": len(datasets),
                "naive_auc": float(np.mean(naive_means)),
                "entropy_auc": float(np.mean(entropy_means)),
                "mean_improvement": float(np.mean(entropy_means) - np.mean(naive_means)),
                "p_value": p_value,
                "time_ratio": time_ratio,
            }
        )
        optimal = [r for r in records if r.get("mode") == "optimal" and r.get("model") == kind]
        for ds, n_auc, e_auc in zip(datasets, naive_means, entropy_means):
            e_recs = [r for r in entropy if r["dataset"] == ds]
            o_recs = [r for r in optimal if r["dataset"] == ds]
            detail_rows.append(
                {
                    "dataset": ds,
                    "model": kind,
                    "config_hash": e_recs[0]["config_hash"] if len(e_recs) == 1 else "multiple",
                    "naive_auc": n_auc,
                    "entropy_auc": e_auc,
                    "optimal_auc": float(np.mean([r["auc"] for r in o_recs])) if o_recs else "",
                    "selected_iter": e_recs[0]["selected_iter"] if len(e_recs) == 1 else "",
                    "total_iters": e_recs[0]["total_iters"] if len(e_recs) == 1 else "",
                    "p_value": p_value,
                }
            )
    return group_rows, detail_rows


def _paired_time_ratios(naive: list[dict], entropy: list[dict]) -> list[float]:
    naive_by_key = {(r["dataset"], r["config_hash"]): r for r in naive}
    ratios = []
    for r in entropy:
        mate = naive_by_key.get((r["dataset"], r["config_hash"]))
        if mate and mate["wall_time_s"]:
            ratios.append(r["wall_time_s"] / mate["wall_time_s"])
    return ratios
