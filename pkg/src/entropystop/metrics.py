"""Label-dependent evaluation statistics.

AUC uses the rank (Mann-Whitney) formulation with midrank tie handling;
dead relu units can produce duplicated scores, so ties must count as half
a concordant pair rather than being broken arbitrarily.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidInputError

EXACT_WILCOXON_LIMIT = 20


def auc(scores, labels) -> float:
    """Area under the ROC curve for binary labels (1 = outlier).

    Computed as (R_plus - m(m+1)/2) / (m * (n - m)) where R_plus is the
    midrank sum of the outlier scores; equal scores contribute 1/2.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise InvalidInputError("scores and labels must have equal length")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores must be finite")
    m = int(np.sum(y == 1))
    n = s.size
    if m == 0 or m == n:
        raise InvalidInputError("labels must contain both classes")
    ranks = rankdata(s, method="average")
    r_plus = ranks[y == 1].sum()
    return float((r_plus - m * (m + 1) / 2.0) / (m * (n - m)))


def score_auc(auc_table) -> np.ndarray:
    """Per-algorithm mean of dataset-wise AUC normalized by each dataset's best.

    ``auc_table`` is algorithms x datasets. The best algorithm on a dataset
    contributes 1 for that column, everyone else their fraction of the best.
    """
    t = np.asarray(auc_table, dtype=np.float64)
    if t.ndim != 2 or t.size == 0:
        raise InvalidInputError("expected a non-empty 2-D table")
    col_max = t.max(axis=0)
    if np.any(col_max <= 0.0):
        raise InvalidInputError("every dataset column needs a positive maximum")
    return (t / col_max).mean(axis=1)


def pearson(x, y) -> float:
    """Sample correlation coefficient; inputs must be nonconstant."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise InvalidInputError("need two equal-length arrays with >= 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.sum(xc * xc))
    sy = np.sqrt(np.sum(yc * yc))
    if sx == 0.0 or sy == 0.0:
        raise InvalidInputError("pearson is undefined for constant input")
    return float(np.clip(np.sum(xc * yc) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class WilcoxonReport:
    statistic: float  # W+: rank sum of positive differences
    p_value: float
    n_effective: int


def wilcoxon_one_sided(a, b) -> WilcoxonReport:
    """Paired Wilcoxon signed-rank test of the alternative median(a - b) > 0.

    Zero differences are dropped; |differences| are midranked. For up to
    20 effective pairs the p-value enumerates the exact null distribution of
    W+ over all sign assignments of the observed ranks (valid under ties);
    beyond that a normal approximation with tie correction and a one-sided
    continuity correction is used.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInputError("paired samples must have equal length")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise InvalidInputError("all differences are zero")
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0.0].sum())
    if n <= EXACT_WILCOXON_LIMIT:
        p = _exact_greater_pvalue(ranks, w_plus)
    else:
        p = _normal_greater_pvalue(ranks, w_plus, n)
    return WilcoxonReport(statistic=w_plus, p_value=p, n_effective=n)


def _exact_greater_pvalue(ranks, w_plus) -> float:
    # Midranks are multiples of 1/2, so doubling makes them exact integers.
    weights = np.rint(2.0 * np.asarray(ranks)).astype(np.int64)
    target = int(round(2.0 * w_plus))
    total = int(weights.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for w in weights:
        shifted = np.zeros_like(counts)
        shifted[w:] = counts[: counts.size - w]
        counts = counts + shifted
    return float(counts[target:].sum() / 2.0 ** len(weights))


def _normal_greater_pvalue(ranks, w_plus, n) -> float:
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # Tie correction: subtract sum(t^3 - t)/48 over groups of tied |d|.
    _, tie_counts = np.unique(np.asarray(ranks), return_counts=True)
    var -= float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts)) / 48.0
    if var <= 0.0:
        raise InvalidInputError("degenerate variance in the normal approximation")
    z = (w_plus - mean - 0.5) / math.sqrt(var)
    return float(0.5 * math.erfc(z / math.sqrt(2.0)))
