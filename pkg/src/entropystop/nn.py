"""Minimal feed-forward networks with manual backpropagation.

The model zoo is small (dense MLPs only), so gradients are written out by
hand instead of pulling in an autodiff framework. That keeps runs bit-for-bit
reproducible from a seed and makes the finite-difference oracle in
``grad_check`` a genuine independent check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    ContractViolationError,
    InvalidInputError,
    NumericalError,
    ShapeError,
)
from .tensor import RngStream


class ForwardMode(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "identity"
    slope: float = 0.1  # leaky_relu only
    use_bias: bool = True

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise InvalidInputError("layer dims must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        if self.activation == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise InvalidInputError("leaky_relu slope must be in (0, 1)")


def _activate(z, spec: LayerSpec):
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    if spec.activation == "leaky_relu":
        return np.where(z > 0.0, z, spec.slope * z)
    if spec.activation == "sigmoid":
        return expit(z)
    return z


def _activate_grad(z, a, spec: LayerSpec):
    # a is the already-computed activation; reused for sigmoid.
    if spec.activation == "relu":
        return (z > 0.0).astype(np.float64)
    if spec.activation == "leaky_relu":
        return np.where(z > 0.0, 1.0, spec.slope)
    if spec.activation == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


class _DenseLayer:
    def __init__(self, spec: LayerSpec, rng: RngStream):
        self.spec = spec
        bound = math.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        self.w = rng.uniform(-bound, bound, size=(spec.in_dim, spec.out_dim))
        self.b = np.zeros(spec.out_dim) if spec.use_bias else None


@dataclass
class ParamSnapshot:
    """Flat copy of every parameter plus the shape manifest to rebuild them."""

    flat: np.ndarray
    shapes: tuple


class _Cache:
    """Per-forward activation record consumed by exactly one backward call."""

    def __init__(self, net, n_rows, mode):
        self.net = net
        self.n_rows = n_rows
        self.mode = mode
        self.layers = []  # (x_in, z, a, drop_mask) per layer


class Mlp:
    """Dense multilayer perceptron with inverted dropout.

    Dropout applies after the activation of every layer except the last,
    scaling kept units by 1/keep at train time so eval-mode outputs need no
    rescaling and stay comparable across dropout rates.
    """

    def __init__(self, specs: list[LayerSpec], dropout: float = 0.0, rng: RngStream = None):
        if not specs:
            raise InvalidInputError("need at least one layer")
        for prev, cur in zip(specs, specs[1:]):
            if prev.out_dim != cur.in_dim:
                raise ShapeError(f"layer chain breaks: {prev.out_dim} -> {cur.in_dim}")
        if not 0.0 <= dropout <= 1.0:
            raise InvalidInputError("dropout rate must be in [0, 1]")
        if rng is None:
            raise InvalidInputError("an RngStream is required for weight init")
        self.specs = tuple(specs)
        self.dropout = float(dropout)
        self.layers = [_DenseLayer(s, rng) for s in specs]

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.w)
            if layer.b is not None:
                out.append(layer.b)
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def forward(self, X, mode: ForwardMode = ForwardMode.EVAL, rng: RngStream = None):
        """Run the net; returns (cache, output).

        Eval mode is deterministic. Train mode needs ``rng`` when dropout > 0.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ShapeError(f"expected (n, {self.in_dim}) input, got {X.shape}")
        use_dropout = mode is ForwardMode.TRAIN and self.dropout > 0.0
        if use_dropout and rng is None:
            raise InvalidInputError("train-mode forward with dropout needs an rng")
        cache = _Cache(self, X.shape[0], mode)
        h = X
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            z = h @ layer.w
            if layer.b is not None:
                z = z + layer.b
            a = _activate(z, layer.spec)
            mask = None
            if use_dropout and i != last:
                keep = 1.0 - self.dropout
                if keep <= 0.0:
                    mask = np.zeros_like(a)
                else:
                    mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
            cache.layers.append((h, z, a, mask))
            h = a
        return cache, h

    def backward(self, cache: _Cache, upstream_grad):
        """Gradients of a scalar loss w.r.t. every parameter.

        ``upstream_grad`` is dLoss/dOutput for the forward pass that produced
        ``cache``; returns (param_grads, input_grad) with param_grads ordered
        as ``params()``.
        """
        if not isinstance(cache, _Cache) or cache.net is not self:
            raise ContractViolationError("backward needs the cache from this net's forward")
        if len(cache.layers) != len(self.layers):
            raise ContractViolationError("stale cache: layer count mismatch")
        g = np.asarray(upstream_grad, dtype=np.float64)
        if g.shape != (cache.n_rows, self.out_dim):
            raise ShapeError(f"upstream grad shape {g.shape}, expected ({cache.n_rows}, {self.out_dim})")
        grads = []
        for layer, (x_in, z, a, mask) in zip(reversed(self.layers), reversed(cache.layers)):
            if mask is not None:
                g = g * mask
            g = g * _activate_grad(z, a, layer.spec)
            gw = x_in.T @ g
            if layer.b is not None:
                grads.append(g.sum(axis=0))
            grads.append(gw)
            g = g @ layer.w.T
        grads.reverse()
        return grads, g

    def snapshot(self) -> ParamSnapshot:
        parts = self.params()
        return ParamSnapshot(
            flat=np.concatenate([p.ravel() for p in parts]),
            shapes=tuple(p.shape for p in parts),
        )

    def restore(self, snap: ParamSnapshot) -> None:
        parts = self.params()
        if tuple(p.shape for p in parts) != snap.shapes:
            raise ContractViolationError("snapshot does not match this architecture")
        off = 0
        for p in parts:
            np.copyto(p, snap.flat[off : off + p.size].reshape(p.shape))
            off += p.size


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"  # sgd | adam
    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise InvalidInputError(f"unknown optimizer {self.kind!r}")
        if self.lr <= 0.0:
            raise InvalidInputError("lr must be > 0")
        if self.weight_decay < 0.0:
            raise InvalidInputError("weight_decay must be >= 0")


class SgdOptimizer:
    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        _check_grads(params, grads)
        for p, g in zip(params, grads):
            p -= self.cfg.lr * (g + self.cfg.weight_decay * p)


class AdamOptimizer:
    """Bias-corrected Adam; weight decay enters as an L2 term on the gradient."""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        _check_grads(params, grads)
        cfg = self.cfg
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1t = 1.0 - cfg.beta1**self.t
        b2t = 1.0 - cfg.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if cfg.weight_decay > 0.0:
                g = g + cfg.weight_decay * p
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.lr * (m / b1t) / (np.sqrt(v / b2t) + cfg.eps)


def _check_grads(params, grads):
    if len(params) != len(grads):
        raise ShapeError("parameter/gradient count mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient")


def make_optimizer(cfg: OptimizerConfig):
    return SgdOptimizer(cfg) if cfg.kind == "sgd" else AdamOptimizer(cfg)


def grad_check(net: Mlp, loss_fn, X, h: float = 1e-5) -> float:
    """Max relative error of backprop gradients against central differences.

    ``loss_fn(output, X) -> (scalar_loss, dLoss/dOutput)`` defines the loss;
    the analytic path uses ``backward`` while the numeric path perturbs each
    parameter coordinate by +-h in eval mode. The relative error denominator
    is max(1e-8, |analytic| + |numeric|).
    """
    if h <= 0.0:
        raise InvalidInputError("h must be > 0")
    X = np.asarray(X, dtype=np.float64)
    cache, out = net.forward(X, ForwardMode.EVAL)
    _, gout = loss_fn(out, X)
    analytic, _ = net.backward(cache, gout)
    worst = 0.0
    for p, ga in zip(net.params(), analytic):
        flat = p.ravel()
        gflat = ga.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = loss_fn(net.forward(X, ForwardMode.EVAL)[1], X)
            flat[i] = orig - h
            lm, _ = loss_fn(net.forward(X, ForwardMode.EVAL)[1], X)
            flat[i] = orig
            gn = (lp - lm) / (2.0 * h)
            err = abs(gflat[i] - gn) / max(1e-8, abs(gflat[i]) + abs(gn))
            worst = max(worst, err)
    return worst


def min_kink_distance(net: Mlp, X) -> float:
    """Smallest |pre-activation| over relu-family layers; inf if none.

    Finite-difference checks are unreliable near a relu kink, so callers can
    resample inputs until this clears their threshold.
    """
    cache, _ = net.forward(np.asarray(X, dtype=np.float64), ForwardMode.EVAL)
    best = math.inf
    for layer, (_, z, _, _) in zip(net.layers, cache.layers):
        if layer.spec.activation in ("relu", "leaky_relu"):
            if z.size:
                best = min(best, float(np.abs(z).min()))
    return best
