import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chisquare

from entropystop.errors import InvalidInputError, ShapeError
from entropystop.tensor import (
    Dataset,
    RngStream,
    add,
    col_stats,
    hadamard,
    load_csv,
    matmul,
    row_mean,
    sample_rows,
    save_csv,
    standardize,
    transpose,
)


class TestRngStream:
    def test_same_seed_same_sequence(self):
        a = RngStream(1234).normal(size=100)
        b = RngStream(1234).normal(size=100)
        assert np.array_equal(a, b)

    def test_derive_is_reproducible_and_distinct(self):
        root = RngStream(7)
        c1 = root.derive(3).normal(size=10)
        c2 = RngStream(7).derive(3).normal(size=10)
        assert np.array_equal(c1, c2)
        assert not np.array_equal(c1, root.derive(4).normal(size=10))

    def test_derive_chains(self):
        a = RngStream(7).derive(1).derive(2).uniform(size=5)
        b = RngStream(7).derive(1).derive(2).uniform(size=5)
        assert np.array_equal(a, b)


class TestDataset:
    def test_label_validation(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((3, 2)), labels=[0, 1])
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((3, 2)), labels=[0, 1, 2])

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.array([[1.0, np.nan]]))


class TestStandardize:
    def test_hand_column(self):
        ds = standardize(Dataset(np.array([[1.0], [2.0], [3.0]])))
        assert_allclose(ds.X[:, 0], [-1.22474487, 0.0, 1.22474487], atol=1e-8)

    def test_constant_column_maps_to_zero(self):
        ds = standardize(Dataset(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])))
        assert np.all(ds.X[:, 0] == 0.0)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.normal(size=(50, 4)))
        once = standardize(ds)
        twice = standardize(once)
        assert np.max(np.abs(twice.X - once.X)) < 1e-10

    def test_labels_pass_through(self):
        ds = Dataset(np.arange(6.0).reshape(3, 2), labels=[0, 1, 0])
        out = standardize(ds)
        assert np.array_equal(out.labels, [0, 1, 0])

    def test_single_row_rejected(self):
        with pytest.raises(InvalidInputError):
            standardize(Dataset(np.ones((1, 2))))

    def test_moments(self):
        rng = np.random.default_rng(3)
        ds = standardize(Dataset(rng.normal(5, 3, size=(200, 6))))
        mean, std = col_stats(ds.X)
        assert_allclose(mean, 0.0, atol=1e-12)
        assert_allclose(std, 1.0, atol=1e-12)


def naive_matmul(a, b):
    n, k = a.shape
    _, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            for t in range(k):
                out[i, j] += a[i, t] * b[t, j]
    return out


class TestKernels:
    def test_identity(self):
        a = np.arange(9.0).reshape(3, 3)
        assert_allclose(matmul(np.eye(3), a), a)

    def test_transpose_involution(self):
        a = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(transpose(transpose(a)), a)

    def test_hand_matvec(self):
        assert_allclose(matmul([[1.0, 2.0], [3.0, 4.0]], [[1.0], [1.0]]), [[3.0], [7.0]])

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))
        with pytest.raises(ShapeError):
            add(np.ones((2, 3)), np.ones((3, 2)))
        with pytest.raises(ShapeError):
            hadamard(np.ones((2, 3)), np.ones((2, 2)))

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            a = rng.normal(size=(8, 8))
            b = rng.normal(size=(8, 8))
            assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) < 1e-12
            assert np.max(np.abs(add(a, b) - (a + b))) < 1e-12
            assert np.max(np.abs(hadamard(a, b) - a * b)) < 1e-12
            assert np.max(np.abs(row_mean(a) - a.sum(axis=1) / 8)) < 1e-12


class TestSampleRows:
    def test_full_draw_is_permutation(self):
        ds = Dataset(np.arange(10.0).reshape(10, 1))
        out = sample_rows(ds, 10, RngStream(3))
        assert sorted(out.X[:, 0].tolist()) == list(range(10))

    def test_single_row_dataset(self):
        ds = Dataset(np.array([[42.0]]))
        out = sample_rows(ds, 1, RngStream(0))
        assert out.X[0, 0] == 42.0

    def test_deterministic(self):
        ds = Dataset(np.random.default_rng(1).normal(size=(100, 3)))
        a = sample_rows(ds, 5, RngStream(9)).X
        b = sample_rows(ds, 5, RngStream(9)).X
        assert np.array_equal(a, b)

    def test_rows_distinct(self):
        ds = Dataset(np.arange(50.0).reshape(50, 1))
        out = sample_rows(ds, 30, RngStream(2))
        assert len(set(out.X[:, 0].tolist())) == 30

    def test_oversample_rejected(self):
        ds = Dataset(np.ones((3, 1)))
        with pytest.raises(InvalidInputError):
            sample_rows(ds, 4, RngStream(0))

    def test_uniform_coverage_chisquare(self):
        # 1e5 size-1 draws with counter seeds should cover indices uniformly.
        n = 10
        ds = Dataset(np.arange(float(n)).reshape(n, 1))
        counts = np.zeros(n)
        for seed in range(100_000):
            row = sample_rows(ds, 1, RngStream(seed))
            counts[int(row.X[0, 0])] += 1
        assert chisquare(counts).pvalue > 0.001


class TestCsvRoundTrip:
    def test_with_labels(self, tmp_path):
        rng = np.random.default_rng(5)
        ds = Dataset(rng.normal(size=(20, 3)), labels=rng.integers(0, 2, 20), name="t")
        path = tmp_path / "t.csv"
        save_csv(ds, path)
        back = load_csv(path)
        assert np.array_equal(back.X, ds.X)
        assert np.array_equal(back.labels, ds.labels)

    def test_without_labels(self, tmp_path):
        ds = Dataset(np.random.default_rng(1).normal(size=(5, 2)))
        path = tmp_path / "t.csv"
        save_csv(ds, path)
        assert load_csv(path).labels is None

    def test_drop_label_1(self, tmp_path):
        ds = Dataset(np.arange(8.0).reshape(4, 2), labels=[0, 1, 0, 1])
        path = tmp_path / "t.csv"
        save_csv(ds, path)
        back = load_csv(path, drop_label_1=True)
        assert back.n == 2
        assert back.labels is None

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,label\n1.0,0\noops,1\n")
        with pytest.raises(InvalidInputError, match="3"):
            load_csv(path)
