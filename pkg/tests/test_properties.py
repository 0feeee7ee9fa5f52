"""Property-based checks of the core estimators, generators and metrics."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy import stats

from synthtest import errors
from synthtest.data import Dataset, Feature, Interval, Schema, SubgroupSpec, category
from synthtest.evaluation import coverage_width, estimate, fairness_ratio
from synthtest.generator import CopulaGenerator, fit_copula
from synthtest.quality import corrupt, marginal_divergences, mmd_rbf
from synthtest.shifts import MeanShift, rejection_sample, reweight_probs, shifted_prevalence

from conftest import gaussian_pair

SLOW = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

GRID = Schema([Feature("x", "continuous"), Feature("c", "categorical", ("p", "q", "r")),
               Feature("pred", "binary"), Feature("y", "binary")], "y")
PAIR = Schema([Feature("a", "categorical", ("g1", "g2")), Feature("pred", "binary"), Feature("y", "binary")], "y")


class PredColumn:
    def predict(self, ds):
        return ds.codes("pred")


@st.composite
def grid_data(draw, max_rows=1000):
    n = draw(st.integers(1, max_rows))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    vals = np.column_stack([np.round(rng.normal(0, 1, n), 2), rng.integers(0, 3, n),
                            rng.integers(0, 2, n), rng.integers(0, 2, n)]).astype(float)
    return Dataset(GRID, vals)


@st.composite
def small_sets(draw):
    def one():
        rows = draw(st.lists(st.tuples(st.floats(-5, 5, allow_nan=False), st.integers(0, 1)), min_size=2, max_size=25))
        return np.array(rows, dtype=float)
    a, b = one(), one()
    schema = Schema([Feature("x", "continuous"), Feature("y", "binary")], "y")
    return Dataset(schema, a), Dataset(schema, b)


# -- subgroup estimator --------------------------------------------------------------------

@SLOW
@given(grid_data(), st.sampled_from(["p", "q", "r", None]), st.floats(-2, 2), st.floats(0.1, 3))
def test_estimate_matches_brute_force(ds, cat, low, width):
    spec = SubgroupSpec((Interval("x", low, low + width),))
    if cat is not None:
        spec = spec & category("c", cat)
    hits = total = 0
    for row in ds.rows():
        if spec.contains(row):
            total += 1
            hits += row["pred"] == row["y"]
    if total == 0:
        with pytest.raises(errors.EmptySubgroup):
            estimate(PredColumn(), ds, spec)
    else:
        assert estimate(PredColumn(), ds, spec).value == pytest.approx(hits / total, abs=1e-12)


# -- conditional generation ----------------------------------------------------------------

@SLOW
@given(st.sampled_from(["A", "B", "C", "D"]), st.sampled_from(["north", "south", "east", "west"]),
       st.floats(0.05, 0.95), st.integers(0, 10_000))
def test_conditional_rows_hold_condition_exactly(gt_gen, gt_data, group, region, q, seed):
    age = float(np.quantile(gt_data.column("age"), q))
    out = gt_gen.sample_conditional({"group": group, "region": region, "age": age}, 40, seed)
    assert np.all(out.codes("group") == gt_data.schema.feature("group").code(group))
    assert np.all(out.codes("region") == gt_data.schema.feature("region").code(region))
    assert np.all(out.column("age") == age)


# -- shift families ------------------------------------------------------------------------

def _logit(p):
    return math.log(p / (1 - p))


@given(st.floats(0.01, 0.99), st.floats(-5, 5), st.floats(-5, 5))
def test_logit_shift_is_additive(p0, s1, s2):
    one = shifted_prevalence(p0, s1)
    assert _logit(one) - _logit(p0) == pytest.approx(s1, abs=1e-9)
    assert shifted_prevalence(one, s2) == pytest.approx(shifted_prevalence(p0, s1 + s2), abs=1e-12)


@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=8), st.data(), st.floats(0.001, 0.999))
def test_reweight_stays_on_simplex(raw, data, q):
    p0 = np.asarray(raw) / np.sum(raw)
    t = data.draw(st.integers(0, len(raw) - 1))
    out = reweight_probs(p0, t, q)
    assert abs(out.sum() - 1.0) <= 1e-12
    assert out[t] == q and np.all(out >= 0)
    rest = np.delete(np.arange(len(raw)), t)
    np.testing.assert_allclose(out[rest] / out[rest].sum(), p0[rest] / p0[rest].sum(), rtol=1e-12)


def test_rejection_sampler_zero_shift_ks(gt_data):
    out = rejection_sample(gt_data, MeanShift("age", 0.0), 2000, seed=0)
    for feat in ("age", "income", "hours"):
        assert stats.ks_2samp(out.column(feat), gt_data.column(feat)).statistic <= 0.03


# -- MMD -----------------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(small_sets())
def test_mmd_symmetric_and_bounded_below(pair):
    A, B = pair
    assert mmd_rbf(A, B) == mmd_rbf(B, A)
    assert mmd_rbf(A, B) >= -2.0 / min(len(A), len(B)) - 1e-12


def test_mmd_hand_values():
    schema = Schema([Feature("x", "continuous"), Feature("y", "binary")], "y")
    zero = Dataset(schema, np.zeros((2, 2)))
    far = Dataset(schema, np.array([[50.0, 0.0], [50.0, 0.0]]))
    assert mmd_rbf(zero, zero) == 0.0
    assert mmd_rbf(zero, far, bandwidth=0.05) == pytest.approx(2.0, abs=1e-12)


# -- fairness ------------------------------------------------------------------------------

def _fair(counts):
    rows = []
    for group, (n_pos, tp, n_neg, fp) in zip(("g1", "g2"), counts):
        rows += [[group, "1" if i < tp else "0", "1"] for i in range(n_pos)]
        rows += [[group, "1" if i < fp else "0", "0"] for i in range(n_neg)]
    return Dataset.from_rows(PAIR, rows)


@st.composite
def group_counts(draw):
    n_pos, n_neg = draw(st.integers(1, 30)), draw(st.integers(1, 30))
    return n_pos, draw(st.integers(1, n_pos)), n_neg, draw(st.integers(0, n_neg))


@given(group_counts(), group_counts())
def test_fairness_ratios_in_unit_interval(g1, g2):
    ds = _fair((g1, g2))
    for kind in ("di", "eo"):
        assert 0.0 <= fairness_ratio(PredColumn(), ds, kind, "a") <= 1.0


@given(group_counts())
def test_fairness_ratios_one_when_groups_match(g):
    ds = _fair((g, g))
    assert fairness_ratio(PredColumn(), ds, "di", "a") == 1.0
    assert fairness_ratio(PredColumn(), ds, "eo", "a") == 1.0


def test_fairness_derived_examples():
    # selection rates 4/20 vs 8/20; TPR 0.9 vs 0.6 and FPR 0.1 vs 0.2
    assert fairness_ratio(PredColumn(), _fair(((10, 4, 10, 0), (10, 8, 10, 0))), "di", "a") == pytest.approx(0.5)
    assert fairness_ratio(PredColumn(), _fair(((10, 9, 10, 1), (10, 6, 10, 2))), "eo", "a") == pytest.approx(0.5)


# -- coverage ------------------------------------------------------------------------------

def test_coverage_width_example():
    c, w = coverage_width([(0.4, 0.6), (0.0, 0.1), (0.7, 0.9)], [0.5, 0.9, 0.7])
    assert c == pytest.approx(2 / 3) and w == pytest.approx(0.5 / 3)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=30),
       st.randoms(use_true_random=False))
def test_coverage_width_permutation_invariant(cases, rnd):
    ivs = [(min(a, b), max(a, b)) for a, b, _ in cases]
    truths = [t for _, _, t in cases]
    order = list(range(len(cases)))
    rnd.shuffle(order)
    c1, w1 = coverage_width(ivs, truths)
    c2, w2 = coverage_width([ivs[i] for i in order], [truths[i] for i in order])
    assert c1 == c2 and w1 == pytest.approx(w2, abs=1e-15)
    assert 0.0 <= c1 <= 1.0 and w1 >= 0.0


# -- latent geometry -----------------------------------------------------------------------

def test_chi2_two_dim_radius():
    g = fit_copula(gaussian_pair(200, 0.0, 0), seed=0)
    g2 = CopulaGenerator(g.schema, g.marginals[:2], np.eye(2), g.lam, 0)
    assert g2.support_radius(1 - math.exp(-1)) == pytest.approx(math.sqrt(2), abs=1e-12)


# -- fidelity metrics under corruption -----------------------------------------------------

def test_corruption_increases_divergence(gt_gen, gt_data):
    syn = gt_gen.sample(2000, 0)
    real = gt_data.take(np.arange(2000))
    mmds, jsds = [], []
    for rho in (0.0, 0.25, 0.5):
        bad = corrupt(syn, rho, 0)
        mmds.append(mmd_rbf(real, bad))
        jsds.append(marginal_divergences(real, bad)[0])
    assert mmds[0] < mmds[1] < mmds[2]
    assert jsds[0] < jsds[1] < jsds[2]
