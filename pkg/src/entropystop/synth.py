"""Synthetic inliers via Gaussian mixtures and heterogeneous outlier injection.

Three injection kinds, each a different way of perturbing a mixture fitted
to the inliers:

  local    draw from the fitted GMM with every covariance scaled by alpha
           (default 5): points near the normal clusters but too spread out.
  global   draw each coordinate uniformly from [alpha*min, alpha*max] of the
           inlier feature range (alpha 1.1): out-of-range points.
  cluster  draw from the fitted GMM with every mean scaled by alpha
           (default 5), covariances unchanged: a coherent shifted group.

Injection must happen on raw features; scaling means is a no-op on centered
data, so standardize after injecting, not before.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateFitError, DegenerateInjectionError, InvalidInputError
from .tensor import Dataset, RngStream, standardize

DEFAULT_ALPHAS = {"local": 5.0, "global": 1.1, "cluster": 5.0}
INJECTION_KINDS = ("local", "global", "cluster")


@dataclass
class GmmModel:
    """Full-covariance Gaussian mixture."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covs: np.ndarray  # (K, d, d)
    ll_history: np.ndarray | None = None  # per-EM-iteration mean log-likelihood

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class InjectionConfig:
    kind: str
    ratio: float
    alpha: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in INJECTION_KINDS:
            raise InvalidInputError(f"unknown injection kind {self.kind!r}")
        if not 0.0 < self.ratio < 1.0:
            raise InvalidInputError("outlier ratio must be in (0, 1)")

    @property
    def effective_alpha(self) -> float:
        return DEFAULT_ALPHAS[self.kind] if self.alpha is None else self.alpha


def outlier_count(n_inliers: int, ratio: float) -> int:
    """Outliers to add so the final mixture has the requested outlier ratio.

    ceil(ratio/(1-ratio) * n), guarded against float noise pushing an exact
    integer over the next boundary.
    """
    return math.ceil(ratio / (1.0 - ratio) * n_inliers - 1e-9)


def _log_gauss(X, mean, cov):
    d = X.shape[1]
    chol = np.linalg.cholesky(cov)
    y = solve_triangular(chol, (X - mean).T, lower=True).T
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (d * math.log(2.0 * math.pi) + logdet + np.sum(y * y, axis=1))


def _kmeanspp_centers(X, k, rng: RngStream):
    n = X.shape[0]
    centers = [X[int(rng.integers(0, n))]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((X - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0.0:
            centers.append(X[int(rng.integers(0, n))])
            continue
        centers.append(X[int(rng.choice(n, p=d2 / total))])
    return np.array(centers)


def gmm_fit(
    X,
    k: int,
    rng: RngStream,
    max_iter: int = 200,
    tol: float = 1e-6,
    jitter: float = 1e-6,
    restarts: int = 5,
) -> GmmModel:
    """Fit a full-covariance GMM by EM with k-means++-style seeding.

    Convergence is declared when the mean per-sample log-likelihood improves
    by less than ``tol``. Every covariance update adds ``jitter * I`` to stay
    positive definite. A component whose effective sample count falls below
    d+1 triggers a reseeded restart; after ``restarts`` failures the fit is
    declared degenerate.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if n <= k * (d + 1):
        raise InvalidInputError(f"need more than {k * (d + 1)} rows to fit {k} components in {d}-D")
    last_error = None
    for attempt in range(restarts):
        try:
            return _gmm_fit_once(X, k, rng.derive(attempt), max_iter, tol, jitter)
        except DegenerateFitError as exc:
            last_error = exc
    raise DegenerateFitError(f"all {restarts} restarts degenerate: {last_error}")


def _gmm_fit_once(X, k, rng, max_iter, tol, jitter):
    n, d = X.shape
    means = _kmeanspp_centers(X, k, rng)
    base_cov = np.cov(X.T, bias=True).reshape(d, d) + jitter * np.eye(d)
    covs = np.repeat(base_cov[None], k, axis=0)
    weights = np.full(k, 1.0 / k)
    prev_ll = -np.inf
    history = []
    for _ in range(max_iter):
        # E-step in log space.
        log_p = np.stack([_log_gauss(X, means[j], covs[j]) for j in range(k)], axis=1)
        log_p += np.log(weights)
        log_norm = np.logaddexp.reduce(log_p, axis=1)
        resp = np.exp(log_p - log_norm[:, None])
        ll = float(log_norm.mean())
        history.append(ll)
        # M-step.
        counts = resp.sum(axis=0)
        if np.any(counts < d + 1):
            raise DegenerateFitError(f"component support fell below {d + 1}")
        weights = counts / n
        means = (resp.T @ X) / counts[:, None]
        for j in range(k):
            diff = X - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / counts[j] + jitter * np.eye(d)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    return GmmModel(weights=weights, means=means, covs=covs, ll_history=np.array(history))


def gmm_log_likelihood(gmm: GmmModel, X) -> float:
    """Mean per-sample log-likelihood under the mixture."""
    X = np.asarray(X, dtype=np.float64)
    log_p = np.stack([_log_gauss(X, gmm.means[j], gmm.covs[j]) for j in range(gmm.k)], axis=1)
    log_p += np.log(gmm.weights)
    return float(np.logaddexp.reduce(log_p, axis=1).mean())


def gmm_sample(gmm: GmmModel, n: int, rng: RngStream) -> np.ndarray:
    comp = rng.choice(gmm.k, size=n, p=gmm.weights)
    out = np.empty((n, gmm.d))
    for j in range(gmm.k):
        sel = comp == j
        m = int(sel.sum())
        if m == 0:
            continue
        chol = np.linalg.cholesky(gmm.covs[j])
        out[sel] = gmm.means[j] + rng.normal(size=(m, gmm.d)) @ chol.T
    return out


def _assemble(inliers, outliers, rng: RngStream, name: str) -> Dataset:
    X = np.vstack([inliers, outliers])
    labels = np.concatenate([np.zeros(len(inliers), dtype=np.int64), np.ones(len(outliers), dtype=np.int64)])
    order = rng.permutation(X.shape[0])
    return Dataset(X[order], labels=labels[order], name=name)


def inject_local(inliers, gmm: GmmModel, cfg: InjectionConfig, name: str = "") -> Dataset:
    if cfg.kind != "local":
        raise InvalidInputError(f"config kind is {cfg.kind!r}, expected 'local'")
    inliers = np.asarray(inliers, dtype=np.float64)
    rng = RngStream(cfg.seed)
    scaled = GmmModel(gmm.weights, gmm.means, gmm.covs * cfg.effective_alpha)
    outliers = gmm_sample(scaled, outlier_count(inliers.shape[0], cfg.ratio), rng.derive(0))
    return _assemble(inliers, outliers, rng.derive(1), name)


def inject_global(inliers, cfg: InjectionConfig, name: str = "") -> Dataset:
    if cfg.kind != "global":
        raise InvalidInputError(f"config kind is {cfg.kind!r}, expected 'global'")
    inliers = np.asarray(inliers, dtype=np.float64)
    rng = RngStream(cfg.seed)
    lo = cfg.effective_alpha * inliers.min(axis=0)
    hi = cfg.effective_alpha * inliers.max(axis=0)
    n_out = outlier_count(inliers.shape[0], cfg.ratio)
    draw = rng.derive(0)
    outliers = np.column_stack(
        [draw.uniform(min(a, b), max(a, b), size=n_out) for a, b in zip(lo, hi)]
    )
    return _assemble(inliers, outliers, rng.derive(1), name)


def inject_cluster(inliers, gmm: GmmModel, cfg: InjectionConfig, name: str = "") -> Dataset:
    if cfg.kind != "cluster":
        raise InvalidInputError(f"config kind is {cfg.kind!r}, expected 'cluster'")
    inliers = np.asarray(inliers, dtype=np.float64)
    if np.all(np.linalg.norm(gmm.means, axis=1) < 1e-8):
        raise DegenerateInjectionError(
            "all component means are ~0; scaling them is a no-op -- inject before standardization"
        )
    rng = RngStream(cfg.seed)
    scaled = GmmModel(gmm.weights, gmm.means * cfg.effective_alpha, gmm.covs)
    outliers = gmm_sample(scaled, outlier_count(inliers.shape[0], cfg.ratio), rng.derive(0))
    return _assemble(inliers, outliers, rng.derive(1), name)


def inject(inliers, cfg: InjectionConfig, gmm: GmmModel | None = None, name: str = "") -> Dataset:
    if cfg.kind == "global":
        return inject_global(inliers, cfg, name)
    if gmm is None:
        raise InvalidInputError(f"{cfg.kind} injection needs a fitted GMM")
    if cfg.kind == "local":
        return inject_local(inliers, gmm, cfg, name)
    return inject_cluster(inliers, gmm, cfg, name)


def _random_ball(rng: RngStream, d: int, radius: float) -> np.ndarray:
    v = rng.normal(size=d)
    v /= max(np.linalg.norm(v), 1e-12)
    return v * radius * rng.uniform() ** (1.0 / d)


def make_synthetic_suite(
    n_datasets: int,
    n: int,
    d: int,
    k: int,
    kinds,
    ratios,
    seed: int,
) -> tuple[list[Dataset], dict]:
    """Generate labeled benchmark datasets for every (kind, ratio) pair.

    Per dataset: draw a ground-truth GMM (component means inside a radius-3
    ball, spherical covariances with scale in [0.5, 1.5], equal weights),
    sample ``n`` inliers, fit a K-component GMM to them, inject outliers of
    the requested kind, then standardize the combined data. Fully
    reproducible from ``seed``; the returned manifest records enough to
    regenerate each file.
    """
    if isinstance(kinds, str):
        kinds = [kinds]
    ratios = [float(r) for r in (ratios if hasattr(ratios, "__iter__") else [ratios])]
    root = RngStream(seed)
    datasets = []
    manifest = {
        "seed": seed,
        "n_inliers": n,
        "d": d,
        "k": k,
        "entries": [],
    }
    counter = 0
    for kind in kinds:
        for ratio in ratios:
            for i in range(n_datasets):
                rng = root.derive(counter)
                gt_means = np.array([_random_ball(rng.derive(0, j), d, 3.0) for j in range(k)])
                gt_scales = rng.derive(1).uniform(0.5, 1.5, size=k)
                gt = GmmModel(
                    weights=np.full(k, 1.0 / k),
                    means=gt_means,
                    covs=np.array([s * np.eye(d) for s in gt_scales]),
                )
                inliers = gmm_sample(gt, n, rng.derive(2))
                cfg = InjectionConfig(kind=kind, ratio=ratio, seed=int(rng.derive(3).integers(0, 2**31)))
                fitted = None
                if kind != "global":
                    fitted = gmm_fit(inliers, k, rng.derive(4))
                name = f"{kind}_{ratio:g}_{i:03d}"
                ds = standardize(inject(inliers, cfg, gmm=fitted, name=name))
                datasets.append(ds)
                manifest["entries"].append(
                    {
                        "name": name,
                        "kind": kind,
                        "ratio": ratio,
                        "alpha": cfg.effective_alpha,
                        "injection_seed": cfg.seed,
                        "n_rows": ds.n,
                        "n_outliers": int(ds.labels.sum()),
                        "gt_means": gt_means.tolist(),
                        "gt_cov_scales": gt_scales.tolist(),
                    }
                )
                counter += 1
    return datasets, manifest
