import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from entropystop.entropy import (
    EvalSet,
    eval_entropy,
    gradient_effect,
    loss_entropy,
    loss_split,
    make_eval_set,
    normalize_losses,
    read_trace_csv,
    write_trace_csv,
)
from entropystop.errors import InvalidInputError, NumericalError
from entropystop.models import Autoencoder, build_model
from entropystop.tensor import Dataset, RngStream


class TestNormalizeLosses:
    def test_hand_case(self):
        assert_allclose(normalize_losses([1.0, 1.0, 2.0]), [0.25, 0.25, 0.5])

    def test_all_equal_is_uniform(self):
        assert_allclose(normalize_losses([3.0] * 5), [0.2] * 5)

    def test_scale_invariance(self):
        j = np.random.default_rng(0).uniform(size=20)
        for c in (1e-6, 2.0, 1e6):
            assert_allclose(normalize_losses(c * j), normalize_losses(j), atol=1e-15)

    def test_zero_sum_falls_back_to_uniform(self):
        assert_allclose(normalize_losses([0.0, 0.0, 0.0, 0.0]), [0.25] * 4)

    def test_negative_rejected(self):
        with pytest.raises(InvalidInputError):
            normalize_losses([1.0, -0.1])


class TestLossEntropy:
    def test_uniform_is_log_n(self):
        assert_allclose(loss_entropy([0.25] * 4), math.log(4), atol=1e-12)

    def test_one_hot_is_zero(self):
        assert loss_entropy([1.0, 0.0, 0.0, 0.0]) == 0.0

    def test_hand_value(self):
        assert_allclose(loss_entropy([0.25, 0.25, 0.5]), 1.039721, atol=1e-6)

    def test_bounds_property(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            n = int(rng.integers(2, 50))
            p = rng.dirichlet(np.ones(n) * rng.uniform(0.2, 5.0))
            h = loss_entropy(p)
            assert 0.0 <= h <= math.log(n) + 1e-12

    def test_mixing_toward_uniform_never_decreases(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(2, 20))
            p = rng.dirichlet(np.ones(n))
            u = np.full(n, 1.0 / n)
            t = rng.uniform(0.01, 1.0)
            assert loss_entropy((1 - t) * p + t * u) >= loss_entropy(p) - 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        p = rng.dirichlet(np.ones(12))
        assert_allclose(loss_entropy(p), loss_entropy(rng.permutation(p)), atol=1e-12)


class _ScaledLossModel:
    """Stub model whose per-sample losses are a fixed vector times a scale."""

    def __init__(self, base, scale=1.0):
        self.base = np.asarray(base, dtype=np.float64)
        self.scale = scale

    def per_sample_loss(self, X, mode=None, rng=None):
        return self.scale * self.base[: X.shape[0]]


class TestEvalEntropy:
    def test_zero_loss_model_hits_log_n(self):
        eval_set = EvalSet(X=np.zeros((16, 3)))
        model = _ScaledLossModel(np.zeros(16))
        assert_allclose(eval_entropy(model, eval_set), math.log(16), atol=1e-12)

    def test_deterministic_without_training_step(self):
        ds = Dataset(np.random.default_rng(0).normal(size=(40, 4)))
        eval_set = make_eval_set(ds, 16, RngStream(5))
        model = Autoencoder(4, h_dim=8, n_layers=2, dropout=0.5, rng=RngStream(6))
        assert eval_entropy(model, eval_set) == eval_entropy(model, eval_set)

    def test_scale_invariance(self):
        base = np.random.default_rng(4).uniform(0.1, 5.0, size=32)
        eval_set = EvalSet(X=np.zeros((32, 2)))
        ref = eval_entropy(_ScaledLossModel(base, 1.0), eval_set)
        for c in (1e-6, 1.0, 1e6):
            assert abs(eval_entropy(_ScaledLossModel(base, c), eval_set) - ref) < 1e-10

    def test_nonfinite_loss_raises(self):
        eval_set = EvalSet(X=np.zeros((4, 2)))
        model = _ScaledLossModel([1.0, np.inf, 1.0, 1.0])
        with pytest.raises(NumericalError):
            eval_entropy(model, eval_set)

    def test_eval_set_capped_at_n(self):
        ds = Dataset(np.random.default_rng(1).normal(size=(10, 2)))
        es = make_eval_set(ds, 1024, RngStream(0))
        assert es.n == 10


class _FixedLossModel:
    def __init__(self, losses):
        self.losses = np.asarray(losses, dtype=np.float64)

    def per_sample_loss(self, X, mode=None, rng=None):
        return self.losses


class TestLossSplit:
    def test_equal_losses(self):
        ds = Dataset(np.zeros((4, 2)), labels=[0, 0, 1, 1])
        l_in, l_out = loss_split(_FixedLossModel([2.0, 2.0, 2.0, 2.0]), ds)
        assert l_in == l_out == 2.0

    def test_constructed_split(self):
        ds = Dataset(np.zeros((4, 2)), labels=[0, 0, 1, 1])
        l_in, l_out = loss_split(_FixedLossModel([1.0, 1.0, 2.0, 2.0]), ds)
        assert (l_in, l_out) == (1.0, 2.0)

    def test_missing_labels(self):
        with pytest.raises(InvalidInputError):
            loss_split(_FixedLossModel([1.0]), Dataset(np.zeros((2, 2))))

    def test_single_class_rejected(self):
        ds = Dataset(np.zeros((3, 2)), labels=[0, 0, 0])
        with pytest.raises(InvalidInputError):
            loss_split(_FixedLossModel([1.0, 1.0, 1.0]), ds)


class _FixedGradModel:
    def __init__(self, grads):
        self.grads = np.asarray(grads, dtype=np.float64)

    def per_sample_grads(self, X):
        return self.grads


class TestGradientEffect:
    def test_identical_gradients(self):
        v = np.array([3.0, 4.0])
        ds = Dataset(np.zeros((2, 2)), labels=[0, 1])
        gin, gout = gradient_effect(_FixedGradModel([v, v]), ds)
        assert_allclose([gin, gout], [5.0, 5.0])

    def test_cancelling_gradients(self):
        v = np.array([1.0, -2.0])
        ds = Dataset(np.zeros((2, 2)), labels=[0, 1])
        gin, gout = gradient_effect(_FixedGradModel([v, -v]), ds)
        assert gin == gout == 0.0

    def test_zero_gradient_contributes_zero(self):
        ds = Dataset(np.zeros((3, 2)), labels=[0, 0, 1])
        grads = [[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
        gin, gout = gradient_effect(_FixedGradModel(grads), ds)
        mean = np.array([2.0 / 3.0, 0.0])
        assert_allclose(gin, (mean[0] + 0.0) / 2.0)
        assert_allclose(gout, mean[0])

    def test_missing_labels(self):
        with pytest.raises(InvalidInputError):
            gradient_effect(_FixedGradModel([[1.0]]), Dataset(np.zeros((2, 2))))

    def test_real_model_runs(self):
        ds = Dataset(np.random.default_rng(0).normal(size=(30, 4)),
                     labels=[0] * 25 + [1] * 5)
        model = build_model("ae", 4, RngStream(1))
        gin, gout = gradient_effect(model, ds, sample_cap=20)
        assert math.isfinite(gin) and math.isfinite(gout)


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "trace.csv"
        trace = {"entropy": [1.5, 1.2, 1.1], "train_loss": [math.nan, 0.5, 0.4]}
        write_trace_csv(path, trace)
        back = read_trace_csv(path)
        assert np.array_equal(back["iter"], [0, 1, 2])
        assert_allclose(back["entropy"], trace["entropy"])
        assert math.isnan(back["train_loss"][0])
        assert_allclose(back["train_loss"][1:], [0.5, 0.4])

    def test_ragged_rejected(self, tmp_path):
        with pytest.raises(InvalidInputError):
            write_trace_csv(tmp_path / "x.csv", {"a": [1.0], "b": [1.0, 2.0]})
