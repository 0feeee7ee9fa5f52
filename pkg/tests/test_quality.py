import math

import numpy as np
import pytest

from synthtest import errors
from synthtest.data import Dataset, Feature, Schema
from synthtest.quality import (corrupt, encode_pair, holdout_split, jsd, kl, marginal_divergences, mmd_rbf,
                               select_generator)

from conftest import gaussian_pair

ONE = Schema([Feature("x", "continuous"), Feature("y", "binary")], "y")
BIN = Schema([Feature("y", "binary")], "y")


def _xy(xs, ys=None):
    ys = [0.0] * len(xs) if ys is None else ys
    return Dataset(ONE, np.column_stack([np.asarray(xs, float), np.asarray(ys, float)]))


def _bern(n_pos, n):
    return Dataset(BIN, np.r_[np.ones(n_pos), np.zeros(n - n_pos)][:, None])


class TestMMD:
    def test_identical_pair_is_zero(self):
        A = _xy([0.0, 0.0])
        assert mmd_rbf(A, A) == 0.0

    def test_far_clusters_reach_two(self):
        # pooled standardisation puts the clusters 2 units apart whatever the raw offset
        for c in (5.0, 1e3):
            assert mmd_rbf(_xy([0.0, 0.0]), _xy([c, c]), bandwidth=0.05) == pytest.approx(2.0, abs=1e-12)

    def test_same_distribution_near_zero(self):
        A = gaussian_pair(2000, 0.5, 0)
        B = gaussian_pair(2000, 0.5, 1)
        assert abs(mmd_rbf(A, B)) <= 0.01

    def test_shifted_distribution_detected(self):
        A = gaussian_pair(1000, 0.5, 0)
        B = A.with_column("a", A.column("a") + 1.0)
        assert mmd_rbf(A, B) > 0.05

    def test_too_few_rows(self):
        with pytest.raises(errors.TooFewRows):
            mmd_rbf(_xy([0.0]), _xy([0.0, 1.0]))

    def test_bad_bandwidth(self):
        with pytest.raises(errors.ConfigError):
            mmd_rbf(_xy([0.0, 1.0]), _xy([0.0, 1.0]), bandwidth=0.0)

    def test_encoding_layout(self):
        X, Y = encode_pair(_xy([0.0, 2.0], [0, 1]), _xy([4.0, 6.0], [1, 1]))
        assert X.shape == (2, 3) and Y.shape == (2, 3)
        pooled = np.r_[X[:, 0], Y[:, 0]]
        assert pooled.mean() == pytest.approx(0.0) and pooled.std() == pytest.approx(1.0)
        np.testing.assert_array_equal(X[:, 1:], [[1, 0], [0, 1]])


class TestDivergences:
    def test_identical_sets(self, gt_data):
        j, inv = marginal_divergences(gt_data, gt_data)
        assert j == 0.0 and inv == 1.0

    def test_disjoint_support_without_smoothing(self):
        j, inv = marginal_divergences(_bern(10, 10), _bern(0, 10), pseudo=0.0)
        assert j == pytest.approx(math.log(2))
        assert inv == 0.0

    def test_bernoulli_closed_form(self):
        def h(p):
            return -p * math.log(p) - (1 - p) * math.log(1 - p)

        p, q = 0.5, 0.75
        oracle = h((p + q) / 2) - (h(p) + h(q)) / 2
        j, _ = marginal_divergences(_bern(50, 100), _bern(75, 100), pseudo=0.0)
        assert j == pytest.approx(oracle, rel=1e-12)
        m = (p + q) / 2
        direct = 0.5 * (p * math.log(p / m) + (1 - p) * math.log((1 - p) / (1 - m))) \
            + 0.5 * (q * math.log(q / m) + (1 - q) * math.log((1 - q) / (1 - m)))
        assert oracle == pytest.approx(direct, rel=1e-12)
        assert oracle == pytest.approx(0.033822, abs=1e-6)

    def test_kl_infinite_off_support(self):
        assert kl([0.5, 0.5], [1.0, 0.0]) == math.inf

    def test_jsd_symmetric_and_bounded(self):
        p, q = [0.2, 0.3, 0.5], [0.6, 0.3, 0.1]
        assert jsd(p, q) == pytest.approx(jsd(q, p))
        assert 0.0 < jsd(p, q) <= math.log(2)

    def test_bins_validated(self, gt_data):
        with pytest.raises(errors.ConfigError):
            marginal_divergences(gt_data, gt_data, bins=1)


class TestCorrupt:
    def test_zero_is_identity(self, gt_data):
        assert corrupt(gt_data, 0.0, 0).equals(gt_data)

    def test_fraction_of_rows_changed(self):
        ds = gaussian_pair(1000, 0.0, 3)
        changed = np.any(corrupt(ds, 0.25, 0).values != ds.values, axis=1)
        # a replaced binary cell may coincide with the original, continuous ones never do
        assert changed.sum() == 250

    def test_rho_validated(self, gt_data):
        with pytest.raises(errors.ConfigError):
            corrupt(gt_data, 1.5)


class TestSelection:
    def test_holdout_fraction(self, gt_data):
        fit, hold = holdout_split(gt_data, 0.1, 0)
        assert len(hold) == 600 and len(fit) == 5400
        assert not set(fit.index) & set(hold.index)

    def test_single_candidate_returned(self, gt_data):
        fit, hold = holdout_split(gt_data, 0.1, 0)
        best, scores = select_generator([{"lambda": 0.2, "seed": 3}], fit, hold, n_score=500)
        assert best == {"lambda": 0.2, "seed": 3} and len(scores) == 1

    def test_light_shrinkage_wins_on_correlated_data(self):
        ds = gaussian_pair(3000, 0.9, 0)
        fit, hold = holdout_split(ds, 0.2, 0)
        best, scores = select_generator([{"lambda": 0.9}, {"lambda": 0.05}], fit, hold, n_score=1500)
        assert best["lambda"] == 0.05
        assert scores[1].mmd < scores[0].mmd

    def test_empty_candidates(self, gt_data):
        with pytest.raises(errors.ConfigError):
            select_generator([], gt_data, gt_data)
