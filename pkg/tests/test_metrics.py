import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from entropystop.errors import InvalidInputError
from entropystop.metrics import WilcoxonReport, auc, pearson, score_auc, wilcoxon_one_sided


def brute_force_auc(scores, labels):
    """Pair counting: concordant pairs count 1, ties 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    out = scores[labels == 1]
    inl = scores[labels == 0]
    total = 0.0
    for o in out:
        for i in inl:
            if o > i:
                total += 1.0
            elif o == i:
                total += 0.5
    return total / (len(out) * len(inl))


def brute_force_wilcoxon_greater(a, b):
    """Enumerate all sign assignments of the observed midranks."""
    from scipy.stats import rankdata

    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0.0]
    ranks = rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    n = len(d)
    count = 0
    for signs in itertools.product([0, 1], repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        if w >= w_obs - 1e-12:
            count += 1
    return w_obs, count / 2.0**n


class TestAuc:
    def test_perfect_separation(self):
        assert auc([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1]) == 1.0

    def test_all_ties_is_half(self):
        assert auc([5.0] * 6, [0, 1, 0, 1, 0, 1]) == 0.5

    def test_hand_case(self):
        assert_allclose(auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]), 0.75)

    def test_single_class_rejected(self):
        with pytest.raises(InvalidInputError):
            auc([1.0, 2.0], [1, 1])

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(123)
        for _ in range(300):
            n = int(rng.integers(2, 21))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            # Quantized scores force ties.
            scores = np.round(rng.normal(size=n) * 2) / 2
            assert abs(auc(scores, labels) - brute_force_auc(scores, labels)) < 1e-12

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(7)
        scores = rng.normal(size=40)
        labels = rng.integers(0, 2, size=40)
        labels[0], labels[1] = 0, 1
        base = auc(scores, labels)
        for f in (np.exp, lambda s: s**3, lambda s: 10 * s + 3):
            assert_allclose(auc(f(scores), labels), base, atol=1e-12)

    def test_negation_complements_for_tie_free_scores(self):
        rng = np.random.default_rng(8)
        scores = rng.permutation(np.arange(30.0))
        labels = rng.integers(0, 2, size=30)
        labels[0], labels[1] = 0, 1
        assert_allclose(auc(scores, labels) + auc(-scores, labels), 1.0, atol=1e-12)


class TestScoreAuc:
    def test_best_everywhere_scores_one(self):
        table = np.array([[0.9, 0.8], [0.5, 0.4]])
        assert_allclose(score_auc(table)[0], 1.0)

    def test_hand_case(self):
        table = np.array([[0.8, 0.9], [0.8, 0.45]])
        assert_allclose(score_auc(table), [1.0, 0.75])

    def test_single_algorithm_self_normalizes(self):
        assert_allclose(score_auc(np.array([[0.3, 0.7, 0.5]])), [1.0])

    def test_zero_column_rejected(self):
        with pytest.raises(InvalidInputError):
            score_auc(np.array([[0.5, 0.0], [0.4, 0.0]]))

    def test_output_in_unit_interval_and_one_winner(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            table = rng.uniform(0.05, 1.0, size=(int(rng.integers(1, 6)), int(rng.integers(1, 6))))
            s = score_auc(table)
            assert np.all(s > 0.0) and np.all(s <= 1.0 + 1e-12)


class TestPearson:
    def test_identity(self):
        x = np.arange(10.0)
        assert_allclose(pearson(x, x), 1.0)

    def test_affine_anticorrelation(self):
        x = np.arange(10.0)
        assert_allclose(pearson(x, -2 * x + 3), -1.0)

    def test_hand_value(self):
        assert_allclose(pearson([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]), 0.98198, atol=1e-5)

    def test_constant_rejected(self):
        with pytest.raises(InvalidInputError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


class TestWilcoxon:
    def test_all_positive_n5(self):
        rep = wilcoxon_one_sided([2.0, 3.0, 4.0, 5.0, 6.0], [1.0, 1.0, 1.0, 1.0, 1.0])
        assert rep.n_effective == 5
        assert rep.statistic == 15.0
        assert_allclose(rep.p_value, 1.0 / 32.0)

    def test_symmetric_null_near_half(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        b = a + np.array([0.1, -0.1, 0.1, -0.1, 0.1, -0.1])
        p = wilcoxon_one_sided(b, a).p_value
        assert 0.3 < p < 0.8

    def test_all_zero_differences_rejected(self):
        with pytest.raises(InvalidInputError):
            wilcoxon_one_sided([1.0, 2.0], [1.0, 2.0])

    def test_zero_differences_dropped(self):
        rep = wilcoxon_one_sided([1.0, 2.0, 5.0], [1.0, 1.0, 1.0])
        assert rep.n_effective == 2

    def test_exact_matches_enumeration_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            n = int(rng.integers(2, 11))
            a = np.round(rng.normal(size=n), 1)
            b = np.round(rng.normal(size=n), 1)
            if np.all(a - b == 0.0):
                continue
            w_oracle, p_oracle = brute_force_wilcoxon_greater(a, b)
            rep = wilcoxon_one_sided(a, b)
            assert rep.statistic == w_oracle
            assert abs(rep.p_value - p_oracle) < 1e-12

    def test_large_n_uses_normal_approximation(self):
        rng = np.random.default_rng(4)
        a = rng.normal(0.4, 1.0, size=60)
        b = np.zeros(60)
        rep = wilcoxon_one_sided(a, b)
        assert 0.0 < rep.p_value < 0.05

    def test_pvalue_in_unit_interval(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            rep = wilcoxon_one_sided(a, b)
            assert 0.0 < rep.p_value <= 1.0
