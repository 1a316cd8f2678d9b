"""Deep outlier detectors behind a single loss-aligned scoring contract.

Both models define the outlier score as the eval-mode per-sample
self-supervised loss, so score ranks and loss ranks are identical by
construction rather than by audit. Per-sample losses are nonnegative
(mean squared error, squared distance), which is what the loss-entropy
monitor downstream requires.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, InvalidInputError
from .nn import ForwardMode, LayerSpec, Mlp, ParamSnapshot
from .tensor import Dataset, RngStream


# Eval-mode losses are computed in row blocks so the intermediate
# activations stay cache-resident; per-sample losses are row-separable, so
# blocking changes nothing but speed.
EVAL_CHUNK = 256


class OutlierModel:
    """Shared contract: nonnegative per-sample loss, score = eval-mode loss.

    Subclasses own an ``Mlp`` in ``self.net`` and implement ``_loss_block``
    plus the batch-gradient hook used by the trainer.
    """

    net: Mlp

    def per_sample_loss(self, X, mode: ForwardMode = ForwardMode.EVAL, rng: RngStream = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if mode is ForwardMode.EVAL and X.shape[0] > EVAL_CHUNK:
            return np.concatenate(
                [self._loss_block(X[i : i + EVAL_CHUNK], mode, None)
                 for i in range(0, X.shape[0], EVAL_CHUNK)]
            )
        return self._loss_block(X, mode, rng)

    def _loss_block(self, X, mode: ForwardMode, rng: RngStream | None) -> np.ndarray:
        raise NotImplementedError

    def score(self, X) -> np.ndarray:
        """Outlier scores; higher means more outlying."""
        return self.per_sample_loss(X, ForwardMode.EVAL)

    def batch_loss_grads(self, X, rng: RngStream = None, mode: ForwardMode = ForwardMode.TRAIN):
        """Mean loss over the batch and its parameter gradients."""
        raise NotImplementedError

    def per_sample_grads(self, X) -> np.ndarray:
        """Eval-mode gradient of each row's own loss, one flat vector per row."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.net.n_params()))
        for i in range(X.shape[0]):
            _, grads = self.batch_loss_grads(X[i : i + 1], rng=None, mode=ForwardMode.EVAL)
            out[i] = np.concatenate([g.ravel() for g in grads])
        return out

    def prepare(self, ds: Dataset) -> None:
        """Data-dependent initialization hook; default is a no-op."""

    def snapshot(self) -> ParamSnapshot:
        return self.net.snapshot()

    def restore(self, snap: ParamSnapshot) -> None:
        self.net.restore(snap)


def _ae_layer_plan(in_dim: int, h_dim: int, n_layers: int) -> tuple[list[int], list[int]]:
    """Encoder/decoder widths. The bottleneck halves per extra encoder layer."""
    if n_layers < 2:
        raise InvalidInputError("autoencoder needs at least 2 layers per side")
    z_dim = max(1, in_dim // 2 ** (n_layers - 1))
    enc = [in_dim] + [h_dim] * (n_layers - 1) + [z_dim]
    dec = [z_dim] + [h_dim] * (n_layers - 1) + [in_dim]
    return enc, dec


class Autoencoder(OutlierModel):
    """Symmetric MLP autoencoder scored by per-sample mean squared
    reconstruction error, J(x) = ||x - decode(encode(x))||^2 / d."""

    def __init__(
        self,
        in_dim: int,
        h_dim: int = 64,
        n_layers: int = 2,
        activation: str = "relu",
        dropout: float = 0.2,
        relu_slope: float = 0.1,
        rng: RngStream = None,
    ):
        enc, dec = _ae_layer_plan(in_dim, h_dim, n_layers)
        dims = enc + dec[1:]
        specs = []
        for i, (a, b) in enumerate(zip(dims, dims[1:])):
            act = "identity" if i == len(dims) - 2 else activation
            specs.append(LayerSpec(a, b, activation=act, slope=relu_slope))
        self.net = Mlp(specs, dropout=dropout, rng=rng)
        self.in_dim = in_dim

    def _loss_block(self, X, mode: ForwardMode, rng: RngStream | None) -> np.ndarray:
        _, recon = self.net.forward(X, mode, rng)
        return np.mean((X - recon) ** 2, axis=1)

    def batch_loss_grads(self, X, rng: RngStream = None, mode: ForwardMode = ForwardMode.TRAIN):
        X = np.asarray(X, dtype=np.float64)
        n, d = X.shape
        cache, recon = self.net.forward(X, mode, rng)
        loss = float(np.mean((X - recon) ** 2))
        upstream = (2.0 / (n * d)) * (recon - X)
        grads, _ = self.net.backward(cache, upstream)
        return loss, grads


class DeepSvddLite(OutlierModel):
    """One-class MLP embedding scored by squared distance to a fixed center.

    No layer carries a bias and hidden activations are leaky-relu; with a
    bias or a non-leaky activation the net can collapse every point onto the
    center and the score becomes uninformative. The center is set once from
    the initial embedding mean (see ``init_center``) and never trained.
    """

    def __init__(
        self,
        in_dim: int,
        h_dim: int = 32,
        out_dim: int = 16,
        relu_slope: float = 0.1,
        n_layers: int = 2,
        rng: RngStream = None,
    ):
        if n_layers < 1:
            raise InvalidInputError("need at least one layer")
        dims = [in_dim] + [h_dim] * (n_layers - 1) + [out_dim]
        specs = []
        for i, (a, b) in enumerate(zip(dims, dims[1:])):
            act = "identity" if i == len(dims) - 2 else "leaky_relu"
            specs.append(LayerSpec(a, b, activation=act, slope=relu_slope, use_bias=False))
        self.net = Mlp(specs, dropout=0.0, rng=rng)
        self.in_dim = in_dim
        self.center: np.ndarray | None = None

    def init_center(self, ds: Dataset, clamp: float = 0.1) -> np.ndarray:
        """Center = mean initial embedding, with small coordinates pushed to
        +-clamp (sign-preserving) so an all-zero center cannot make the
        objective trivially zero."""
        if ds.n < 1:
            raise InvalidInputError("empty dataset")
        _, phi = self.net.forward(ds.X, ForwardMode.EVAL)
        c = phi.mean(axis=0)
        small = np.abs(c) < clamp
        c[small] = np.copysign(clamp, c[small])
        self.center = c
        return c

    def prepare(self, ds: Dataset) -> None:
        if self.center is None:
            self.init_center(ds)

    def _require_center(self):
        if self.center is None:
            raise ContractViolationError("center not initialized; call init_center first")

    def _loss_block(self, X, mode: ForwardMode, rng: RngStream | None) -> np.ndarray:
        self._require_center()
        _, phi = self.net.forward(X, mode, rng)
        return np.sum((phi - self.center) ** 2, axis=1)

    def batch_loss_grads(self, X, rng: RngStream = None, mode: ForwardMode = ForwardMode.TRAIN):
        self._require_center()
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        cache, phi = self.net.forward(X, mode, rng)
        diff = phi - self.center
        loss = float(np.mean(np.sum(diff**2, axis=1)))
        upstream = (2.0 / n) * diff
        grads, _ = self.net.backward(cache, upstream)
        return loss, grads


def svdd_init_center(model: DeepSvddLite, ds: Dataset, clamp: float = 0.1) -> np.ndarray:
    return model.init_center(ds, clamp=clamp)


def build_model(kind: str, in_dim: int, rng: RngStream, **hp) -> OutlierModel:
    """Construct a model by kind name with keyword hyperparameters."""
    if kind == "ae":
        return Autoencoder(
            in_dim,
            h_dim=hp.get("h_dim", 64),
            n_layers=hp.get("layers", 2),
            activation=hp.get("act_func", "relu"),
            dropout=hp.get("dropout", 0.2),
            relu_slope=hp.get("relu_slope", 0.1),
            rng=rng,
        )
    if kind == "dsvdd":
        return DeepSvddLite(
            in_dim,
            h_dim=hp.get("h_dim", 32),
            out_dim=hp.get("out_dim", 16),
            relu_slope=hp.get("relu_slope", 0.1),
            n_layers=hp.get("layers", 2),
            rng=rng,
        )
    raise InvalidInputError(f"unknown model kind {kind!r}")
