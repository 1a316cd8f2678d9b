"""Training loops: plain (naive), entropy-stopped, and label-oracle (optimal).

One iteration is one gradient update on a single batch; an epoch visits
every batch once (shuffle per epoch, no replacement). All three modes share
the same batch stream and dropout stream for a given seed, so paired
comparisons see identical trajectories up to the stopping point.

Mode summary:
  naive    run all T iterations, keep the final parameters.
  entropy  evaluate loss entropy on a fixed eval set each iteration and let
           the patience stopper pick the best parameters, label-free.
  optimal  score the full dataset each iteration and keep the parameters
           with the best AUC; needs labels, diagnostic only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .entropy import DEFAULT_N_EVAL, EvalSet, eval_entropy, make_eval_set
from .errors import InvalidInputError, NumericalError
from .metrics import auc
from .models import OutlierModel
from .nn import OptimizerConfig, make_optimizer
from .stopper import EntropyStopper, StepDecision, StopperConfig
from .tensor import Dataset, RngStream

MODES = ("naive", "entropy", "optimal")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 250
    batch_size: int = 256
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    n_eval: int = DEFAULT_N_EVAL

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.n_eval < 1:
            raise InvalidInputError("n_eval must be >= 1")

    def total_iters(self, n: int) -> int:
        return self.epochs * math.ceil(n / self.batch_size)


@dataclass
class RunResult:
    mode: str
    scores: np.ndarray
    selected_iter: int
    total_iters: int
    wall_time_s: float
    auc: float | None = None
    entropy_trace: np.ndarray | None = None
    train_loss_trace: np.ndarray | None = None
    auc_trace: np.ndarray | None = None
    loss_in_trace: np.ndarray | None = None
    loss_out_trace: np.ndarray | None = None
    probe_traces: list | None = None
    config_hash: str = ""
    seed: int | None = None
    dataset: str = ""


def _batches(n: int, batch_size: int, epochs: int, rng: RngStream):
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start : start + batch_size]


def _finish(model, ds, result: RunResult) -> RunResult:
    result.scores = model.score(ds.X)
    if ds.labels is not None and np.any(ds.labels == 1) and np.any(ds.labels == 0):
        result.auc = auc(result.scores, ds.labels)
    return result


def train_naive(
    model: OutlierModel,
    ds: Dataset,
    train_cfg: TrainConfig,
    rng: RngStream,
    record_entropy: bool = False,
    entropy_probes: list[EvalSet] | None = None,
) -> RunResult:
    """Run every iteration and keep the final parameters.

    ``record_entropy`` adds the per-iteration entropy trace (costs one eval
    forward per iteration, so it is off by default to keep naive wall time
    an honest baseline). ``entropy_probes`` records one extra trace per
    provided eval set, used for evaluation-set-size diagnostics.
    """
    model.prepare(ds)
    batch_rng, eval_rng, drop_rng = rng.derive(1), rng.derive(2), rng.derive(3)
    probes = list(entropy_probes) if entropy_probes else []
    eval_set = make_eval_set(ds, train_cfg.n_eval, eval_rng) if record_entropy else None
    opt = make_optimizer(train_cfg.optimizer)
    losses = [math.nan]
    ent = [eval_entropy(model, eval_set)] if eval_set else None
    probe_traces = [[eval_entropy(model, p)] for p in probes]
    t0 = time.perf_counter()
    iters = 0
    for batch in _batches(ds.n, train_cfg.batch_size, train_cfg.epochs, batch_rng):
        loss = _train_step(model, ds.X[batch], opt, drop_rng, losses, ent)
        losses.append(loss)
        iters += 1
        if ent is not None:
            ent.append(eval_entropy(model, eval_set))
        for trace, probe in zip(probe_traces, probes):
            trace.append(eval_entropy(model, probe))
    wall = time.perf_counter() - t0
    result = RunResult(
        mode="naive",
        scores=np.empty(0),
        selected_iter=iters,
        total_iters=iters,
        wall_time_s=wall,
        entropy_trace=np.array(ent) if ent is not None else None,
        train_loss_trace=np.array(losses),
        probe_traces=[np.array(t) for t in probe_traces],
    )
    return _finish(model, ds, result)


def _train_step(model, Xb, opt, drop_rng, losses, ent):
    try:
        loss, grads = model.batch_loss_grads(Xb, rng=drop_rng)
        if not math.isfinite(loss):
            raise NumericalError("non-finite training loss")
        opt.step(model.net.params(), grads)
        return loss
    except NumericalError as exc:
        exc.partial_result = {
            "train_loss_trace": np.array(losses),
            "entropy_trace": np.array(ent) if ent is not None else None,
        }
        raise


def train_with_stopper(
    model: OutlierModel,
    ds: Dataset,
    train_cfg: TrainConfig,
    stopper_cfg: StopperConfig,
    rng: RngStream,
) -> RunResult:
    """Entropy-stopped training: the full stopping loop.

    Per iteration: sample batch, gradient step, entropy on the fixed eval
    set, stopper step. Stops when patience runs out or the iteration budget
    is exhausted, then restores the best snapshot and scores the dataset.
    """
    model.prepare(ds)
    batch_rng, eval_rng, drop_rng = rng.derive(1), rng.derive(2), rng.derive(3)
    eval_set = make_eval_set(ds, train_cfg.n_eval, eval_rng)
    opt = make_optimizer(train_cfg.optimizer)
    e0 = eval_entropy(model, eval_set)
    stopper = EntropyStopper(e0, model.snapshot(), stopper_cfg)
    budget = train_cfg.total_iters(ds.n)
    if stopper_cfg.max_iters is not None:
        budget = min(budget, stopper_cfg.max_iters)
    losses = [math.nan]
    ent = [e0]
    t0 = time.perf_counter()
    iters = 0
    for batch in _batches(ds.n, train_cfg.batch_size, train_cfg.epochs, batch_rng):
        if iters >= budget:
            break
        loss = _train_step(model, ds.X[batch], opt, drop_rng, losses, ent)
        losses.append(loss)
        iters += 1
        try:
            e_j = eval_entropy(model, eval_set)
        except NumericalError as exc:
            exc.partial_result = {
                "train_loss_trace": np.array(losses),
                "entropy_trace": np.array(ent),
            }
            raise
        ent.append(e_j)
        if stopper.step(e_j, model.snapshot) is StepDecision.STOP:
            break
    wall = time.perf_counter() - t0
    model.restore(stopper.best_snapshot)
    result = RunResult(
        mode="entropy",
        scores=np.empty(0),
        selected_iter=stopper.best_iter,
        total_iters=iters,
        wall_time_s=wall,
        entropy_trace=np.array(ent),
        train_loss_trace=np.array(losses),
    )
    return _finish(model, ds, result)


def train_optimal(
    model: OutlierModel,
    ds: Dataset,
    train_cfg: TrainConfig,
    rng: RngStream,
    record_entropy: bool = True,
) -> RunResult:
    """Label-oracle diagnostic: track AUC on the whole dataset per iteration.

    Keeps a snapshot of the best-AUC parameters and restores them at the
    end; selected_iter is the argmax of the AUC trace (earliest on ties).
    """
    if ds.labels is None:
        raise InvalidInputError("optimal mode needs labels")
    if not (np.any(ds.labels == 1) and np.any(ds.labels == 0)):
        raise InvalidInputError("optimal mode needs both classes")
    model.prepare(ds)
    batch_rng, eval_rng, drop_rng = rng.derive(1), rng.derive(2), rng.derive(3)
    eval_set = make_eval_set(ds, train_cfg.n_eval, eval_rng) if record_entropy else None
    opt = make_optimizer(train_cfg.optimizer)
    inl = ds.labels == 0
    out = ds.labels == 1

    def measure():
        j = model.per_sample_loss(ds.X)
        return auc(j, ds.labels), float(j[inl].mean()), float(j[out].mean())

    a0, l_in0, l_out0 = measure()
    auc_curve = [a0]
    l_in_curve, l_out_curve = [l_in0], [l_out0]
    ent = [eval_entropy(model, eval_set)] if eval_set else None
    losses = [math.nan]
    best_auc, best_iter, best_snap = a0, 0, model.snapshot()
    t0 = time.perf_counter()
    iters = 0
    for batch in _batches(ds.n, train_cfg.batch_size, train_cfg.epochs, batch_rng):
        loss = _train_step(model, ds.X[batch], opt, drop_rng, losses, ent)
        losses.append(loss)
        iters += 1
        if ent is not None:
            ent.append(eval_entropy(model, eval_set))
        a, l_in, l_out = measure()
        auc_curve.append(a)
        l_in_curve.append(l_in)
        l_out_curve.append(l_out)
        if a > best_auc:
            best_auc, best_iter, best_snap = a, iters, model.snapshot()
    wall = time.perf_counter() - t0
    model.restore(best_snap)
    result = RunResult(
        mode="optimal",
        scores=np.empty(0),
        selected_iter=best_iter,
        total_iters=iters,
        wall_time_s=wall,
        entropy_trace=np.array(ent) if ent is not None else None,
        train_loss_trace=np.array(losses),
        auc_trace=np.array(auc_curve),
        loss_in_trace=np.array(l_in_curve),
        loss_out_trace=np.array(l_out_curve),
    )
    return _finish(model, ds, result)


def auc_trace(model: OutlierModel, ds: Dataset, train_cfg: TrainConfig, rng: RngStream) -> np.ndarray:
    """Per-iteration AUC of the full-dataset scores, including iteration 0."""
    return train_optimal(model, ds, train_cfg, rng, record_entropy=False).auc_trace


def run_training(
    model: OutlierModel,
    ds: Dataset,
    train_cfg: TrainConfig,
    stopper_cfg: StopperConfig,
    rng: RngStream,
    mode: str,
) -> RunResult:
    if mode == "naive":
        return train_naive(model, ds, train_cfg, rng)
    if mode == "entropy":
        return train_with_stopper(model, ds, train_cfg, stopper_cfg, rng)
    if mode == "optimal":
        return train_optimal(model, ds, train_cfg, rng)
    raise InvalidInputError(f"unknown mode {mode!r}; expected one of {MODES}")
