"""Loss entropy: Shannon entropy of the normalized per-sample loss distribution.

A detector trained on contaminated data first drives down the losses of the
inlier majority, which leaves outlier losses proportionally large and makes
the loss distribution steep (low entropy). Once the model starts fitting the
outliers too, the distribution flattens back out and entropy rises. Tracking
that single number on a fixed evaluation set gives a label-free signal of
when detection quality stops improving.

Entropy is computed with the natural log; the stopping rule downstream is
invariant to the base, so any fixed choice works. Stochastic layers
(dropout) are disabled for every entropy evaluation, so the value is a pure
function of the parameters and the evaluation set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError
from .models import OutlierModel
from .nn import ForwardMode
from .tensor import Dataset, RngStream, sample_rows

DEFAULT_N_EVAL = 1024


@dataclass(frozen=True)
class EvalSet:
    """Fixed evaluation rows sampled once before training."""

    X: np.ndarray
    seed: str = ""

    @property
    def n(self) -> int:
        return self.X.shape[0]


def make_eval_set(ds: Dataset, n_eval: int = DEFAULT_N_EVAL, rng: RngStream = None) -> EvalSet:
    """Sample ``min(n_eval, n)`` rows without replacement as the eval set."""
    if n_eval < 1:
        raise InvalidInputError("n_eval must be >= 1")
    m = min(n_eval, ds.n)
    sub = sample_rows(ds, m, rng) if m < ds.n else ds
    return EvalSet(X=np.array(sub.X, dtype=np.float64), seed=repr(rng.key) if rng else "")


def normalize_losses(losses) -> np.ndarray:
    """Turn nonnegative losses into a probability vector p_i = J_i / sum(J).

    An all-zero loss vector maps to the uniform distribution: with every
    sample reconstructed equally well there is no discrimination signal,
    which is exactly what maximum entropy encodes.
    """
    j = np.asarray(losses, dtype=np.float64).ravel()
    if j.size == 0:
        raise InvalidInputError("empty loss vector")
    if np.any(j < 0.0):
        raise InvalidInputError("losses must be nonnegative; square the raw values upstream")
    total = j.sum()
    if total == 0.0:
        return np.full(j.size, 1.0 / j.size)
    return j / total


def loss_entropy(p) -> float:
    """Shannon entropy -sum(p ln p) with 0 ln 0 = 0; in [0, ln N].

    Flatter distributions score higher, uniform attains ln N, a one-hot
    vector attains 0.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def eval_entropy(model: OutlierModel, eval_set: EvalSet) -> float:
    """Loss entropy of the model on the eval set, deterministic per (params, set)."""
    j = model.per_sample_loss(eval_set.X, ForwardMode.EVAL)
    if not np.all(np.isfinite(j)):
        raise NumericalError("non-finite per-sample loss during entropy evaluation")
    return loss_entropy(normalize_losses(j))


def loss_split(model: OutlierModel, ds: Dataset) -> tuple[float, float]:
    """Mean eval-mode loss over inliers (label 0) and outliers (label 1)."""
    if ds.labels is None:
        raise InvalidInputError("loss split needs labels")
    j = model.per_sample_loss(ds.X, ForwardMode.EVAL)
    inl = j[ds.labels == 0]
    out = j[ds.labels == 1]
    if inl.size == 0 or out.size == 0:
        raise InvalidInputError("both classes must be present")
    return float(inl.mean()), float(out.mean())


def gradient_effect(model: OutlierModel, ds: Dataset, sample_cap: int = 256) -> tuple[float, float]:
    """Per-class mean alignment of each sample's gradient with the mean gradient.

    For sample i with loss gradient g_i and batch mean gradient g_bar, the
    effect is <g_i, g_bar> / ||g_i|| (0 when g_i vanishes): how much the
    aggregate update actually reduces that sample's own loss. Inliers pull
    in consistent directions, so early in training their mean effect exceeds
    the outliers'. Rows are subsampled to ``sample_cap`` evenly spaced
    indices since each needs its own backward pass.
    """
    if ds.labels is None:
        raise InvalidInputError("gradient effect needs labels")
    if sample_cap < 1:
        raise InvalidInputError("sample_cap must be >= 1")
    if sample_cap >= ds.n:
        idx = np.arange(ds.n)
    else:
        idx = np.unique(np.linspace(0, ds.n - 1, sample_cap).astype(int))
    labels = ds.labels[idx]
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise InvalidInputError("both classes must be present in the capped sample")
    grads = model.per_sample_grads(ds.X[idx])
    g_bar = grads.mean(axis=0)
    norms = np.linalg.norm(grads, axis=1)
    dots = grads @ g_bar
    effects = np.where(norms > 0.0, dots / np.where(norms > 0.0, norms, 1.0), 0.0)
    return float(effects[labels == 0].mean()), float(effects[labels == 1].mean())


def write_trace_csv(path, trace: dict) -> None:
    """Write per-iteration monitor columns; row 0 is the pre-training state.

    ``trace`` maps column name -> equal-length sequence. ``iter`` is added
    automatically. Missing values should be passed as nan.
    """
    cols = list(trace.keys())
    if not cols:
        raise InvalidInputError("empty trace")
    length = len(trace[cols[0]])
    for c in cols:
        if len(trace[c]) != length:
            raise InvalidInputError("trace columns must have equal length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter"] + cols)
        for i in range(length):
            writer.writerow([i] + [f"{float(trace[c][i]):.17g}" for c in cols])


def read_trace_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for rec in reader:
            for name, val in zip(header, rec):
                cols[name].append(float(val))
    return {name: np.array(vals) for name, vals in cols.items()}
