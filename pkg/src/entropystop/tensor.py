"""Dense float64 kernels, seeded RNG streams, and dataset preprocessing.

Everything downstream (networks, entropy monitoring, synthetic benchmarks)
builds on the primitives here. All public operations work on contiguous
row-major float64 arrays and leave only finite values behind.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError


class RngStream:
    """Deterministic random stream with reproducible child derivation.

    Backed by a PCG64 generator seeded through ``numpy.random.SeedSequence``.
    The algorithm is pinned explicitly (never the library default) so the
    same seed yields the same draw sequence on every platform. ``derive``
    produces statistically independent child streams addressed by integer
    keys, which keeps parallel sweeps and per-dataset generation stable
    regardless of execution order.
    """

    def __init__(self, seed: int, _spawn_key: tuple = ()):
        self.seed = int(seed)
        self.key = (self.seed,) + _spawn_key
        seq = np.random.SeedSequence(self.seed, spawn_key=_spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def derive(self, *key: int) -> "RngStream":
        """Child stream at ``key``; independent of draws made on self."""
        return RngStream(self.seed, _spawn_key=self.key[1:] + tuple(int(k) for k in key))

    def permutation(self, n):
        return self.generator.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def random(self, size=None):
        return self.generator.random(size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)

    def __repr__(self):
        return f"RngStream(key={self.key})"


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-D contiguous float64 array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got ndim={a.ndim}")
    return a


@dataclass
class Dataset:
    """Row-major feature matrix with optional binary outlier labels (1 = outlier)."""

    X: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.X = as_matrix(self.X)
        n, d = self.X.shape
        if n < 1 or d < 1:
            raise InvalidInputError(f"dataset must be at least 1x1, got {n}x{d}")
        if not np.all(np.isfinite(self.X)):
            raise InvalidInputError("dataset contains non-finite features")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if self.labels.shape[0] != n:
                raise InvalidInputError(
                    f"label length {self.labels.shape[0]} != number of rows {n}"
                )
            if not np.all((self.labels == 0) | (self.labels == 1)):
                raise InvalidInputError("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def col_stats(a) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population standard deviation."""
    a = as_matrix(a)
    return a.mean(axis=0), a.std(axis=0)


def standardize(ds: Dataset) -> Dataset:
    """Center each column to mean 0 and scale to population std 1.

    Zero-variance columns map to all-zeros instead of raising; injected
    synthetic data can legitimately contain constant features. Labels pass
    through unchanged.
    """
    if ds.n < 2:
        raise InvalidInputError("standardize needs at least 2 rows")
    mean, std = col_stats(ds.X)
    safe = np.where(std > 0.0, std, 1.0)
    z = (ds.X - mean) / safe
    z[:, std == 0.0] = 0.0
    return Dataset(z, labels=None if ds.labels is None else ds.labels.copy(), name=ds.name)


def sample_rows(ds: Dataset, m: int, rng: RngStream) -> Dataset:
    """Uniform sample of ``m`` distinct rows, deterministic given ``rng``."""
    if not 1 <= m <= ds.n:
        raise InvalidInputError(f"cannot sample {m} rows from {ds.n}")
    idx = rng.choice(ds.n, size=m, replace=False)
    labels = None if ds.labels is None else ds.labels[idx]
    return Dataset(ds.X[idx], labels=labels, name=ds.name)


# Dense kernels. These are thin shape-checked wrappers over numpy; the test
# suite cross-checks them against naive loop oracles.

def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul {a.shape} x {b.shape}")
    return a @ b


def add(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"add {a.shape} vs {b.shape}")
    return a + b


def hadamard(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard {a.shape} vs {b.shape}")
    return a * b


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def row_mean(a) -> np.ndarray:
    return as_matrix(a).mean(axis=1)


# CSV dataset format: header row, feature columns as decimal floats, optional
# final column named exactly `label` holding 0/1. UTF-8, comma-delimited.

def load_csv(path, name: str = "", drop_label_1: bool = False) -> Dataset:
    """Load a dataset CSV.

    ``drop_label_1`` removes rows labelled 1 and strips the label column,
    which mirrors cleaning a contaminated dataset before fresh injection.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        has_label = len(header) > 0 and header[-1] == "label"
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                vals = [float(v) for v in rec]
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            if len(vals) != len(header):
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(vals)}"
                )
            if has_label:
                rows.append(vals[:-1])
                labels.append(int(vals[-1]))
            else:
                rows.append(vals)
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    X = np.array(rows, dtype=np.float64)
    lab = np.array(labels, dtype=np.int64) if has_label else None
    if drop_label_1 and lab is not None:
        X = X[lab == 0]
        lab = None
    return Dataset(X, labels=lab, name=name or str(path))


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [f"f{j}" for j in range(ds.d)]
        if ds.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(ds.n):
            row = [f"{v:.17g}" for v in ds.X[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            writer.writerow(row)
