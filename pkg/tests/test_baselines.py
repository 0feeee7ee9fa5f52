import numpy as np
import pytest

from synthtest import errors
from synthtest.baselines import (NO_TARGET, UNLABELED_TARGET, atc_predict, atc_threshold, bootstrap_interval,
                                 doc_predict, im_predict, im_weights, ms_baseline, rs_baseline, source_all)
from synthtest.data import Dataset, Feature, Schema, category
from synthtest.evaluation import estimate
from synthtest.shifts import MeanShift

CONF = Schema([Feature("conf", "continuous"), Feature("pred", "binary"), Feature("y", "binary")], "y")
STRATA = Schema([Feature("s", "categorical", ("a", "b")), Feature("pred", "binary"), Feature("y", "binary")], "y")
LINE = Schema([Feature("x", "continuous"), Feature("y", "binary")], "y")


class TablePredictor:
    """Reads its prediction and confidence straight off the rows."""

    def predict(self, ds):
        return ds.codes("pred")

    def confidence(self, ds):
        return ds.column("conf")


class SignPredictor:
    def predict(self, ds):
        return (ds.column("x") > 0).astype(np.int64)


def _conf_set(conf, correct):
    rows = [[c, "1", "1" if ok else "0"] for c, ok in zip(conf, correct)]
    return Dataset.from_rows(CONF, rows)


class TestBootstrap:
    def test_constant_correctness_zero_width(self, toy):
        class Oracle:
            def predict(self, ds):
                return ds.labels

        res = bootstrap_interval(Oracle(), toy, None, B=50, seed=0)
        assert res.estimate == 1.0 and res.low == 1.0 and res.high == 1.0

    def test_spread_for_mixed_predictor(self, gt_data, gt_model):
        res = bootstrap_interval(gt_model, gt_data.take(np.arange(300)), None, B=50, seed=0)
        assert res.low < res.estimate < res.high

    def test_empty_subgroup(self, toy):
        with pytest.raises(errors.EmptySubgroup):
            bootstrap_interval(TablePredictor(), toy, category("color", "red") & category("color", "blue"))

    def test_b_validated(self, toy):
        with pytest.raises(errors.ConfigError):
            bootstrap_interval(TablePredictor(), toy, None, B=1)


class TestATC:
    def test_hand_threshold(self):
        src = _conf_set([0.9, 0.8, 0.6, 0.4], [1, 1, 1, 0])
        t = atc_threshold(src.column("conf"), 0.75)
        assert 0.4 < t < 0.6
        tgt = _conf_set([0.9, 0.5], [1, 1])
        assert atc_predict(TablePredictor(), src, tgt).estimate == 0.5

    def test_target_equals_source(self):
        rng = np.random.default_rng(0)
        conf = rng.uniform(0.5, 1.0, 400)
        src = _conf_set(conf, rng.random(400) < conf)
        acc = estimate(TablePredictor(), src).value
        assert abs(atc_predict(TablePredictor(), src, src).estimate - acc) <= 1 / 400

    def test_lower_target_confidence_lowers_estimate(self):
        rng = np.random.default_rng(1)
        conf = rng.uniform(0.5, 1.0, 400)
        src = _conf_set(conf, rng.random(400) < conf)
        tgt = _conf_set(conf - 0.1, np.ones(400))
        assert atc_predict(TablePredictor(), src, tgt).estimate < atc_predict(TablePredictor(), src, src).estimate


class TestDOC:
    def test_hand_arithmetic(self):
        src = _conf_set([0.85] * 10, [1] * 9 + [0])
        tgt = _conf_set([0.75] * 4, [1] * 4)
        res = doc_predict(TablePredictor(), src, tgt)
        assert res.estimate == pytest.approx(0.80, abs=1e-12) and not res.flags

    def test_equal_confidence(self):
        src = _conf_set([0.7, 0.9], [1, 0])
        assert doc_predict(TablePredictor(), src, src).estimate == 0.5

    def test_clipped_with_flag(self):
        src = _conf_set([0.99] * 4, [0, 0, 0, 1])
        tgt = _conf_set([0.1] * 4, [1] * 4)
        res = doc_predict(TablePredictor(), src, tgt)
        assert res.estimate == 0.0 and res.flags == ("clipped",)

    def test_linear_in_gap(self):
        src = _conf_set([0.8] * 5, [1, 1, 1, 0, 0])
        vals = [doc_predict(TablePredictor(), src, _conf_set([0.8 - g] * 3, [1] * 3)).estimate for g in (0.0, 0.1, 0.2)]
        assert vals[0] - vals[1] == pytest.approx(vals[1] - vals[2], abs=1e-12)


def _strata(n_a, n_b, correct_a=True, correct_b=False):
    rows = [["a", "1", "1" if correct_a else "0"]] * n_a + [["b", "1", "1" if correct_b else "0"]] * n_b
    return Dataset.from_rows(STRATA, rows)


class TestIM:
    def test_same_distribution_is_unweighted(self):
        src = _strata(30, 70)
        w = im_weights(src, src, ["s"])
        assert np.all(w == 1.0)
        assert im_predict(TablePredictor(), src, src, ["s"]).estimate == estimate(TablePredictor(), src).value

    def test_two_strata_enumeration(self):
        src = _strata(50, 50)
        tgt = _strata(0, 100)
        # smoothed target stratum masses times per-stratum accuracy (1 in a, 0 in b)
        p_a = (0 + 1) / (100 + 2)
        assert im_predict(TablePredictor(), src, tgt, ["s"]).estimate == pytest.approx(p_a * 1.0 + (1 - p_a) * 0.0)

    def test_concentrated_target_tends_to_stratum_accuracy(self):
        src = _strata(50, 50)
        est = im_predict(TablePredictor(), src, _strata(0, 100000), ["s"]).estimate
        assert est < 1e-4


class TestRealShiftBaselines:
    def test_ms_zero_is_plain(self, gt_data, gt_model):
        assert ms_baseline(gt_data, gt_model, "age", 0.0).estimate == estimate(gt_model, gt_data).value

    def test_ms_threshold_direction(self):
        x = np.linspace(-2, 2, 401)
        ds = Dataset(LINE, np.column_stack([x, (x > 0).astype(float)]))
        res = ms_baseline(ds, SignPredictor(), "x", 1.0)
        # rows with x in (-1, 0] flip to a wrong positive call
        assert res.estimate == pytest.approx(1 - np.sum((x > -1) & (x <= 0)) / x.size)

    def test_ms_needs_continuous(self, gt_data, gt_model):
        with pytest.raises(errors.NotContinuous):
            ms_baseline(gt_data, gt_model, "group", 1.0)

    def test_rs_zero_near_plain(self, gt_data, gt_model):
        plain = estimate(gt_model, gt_data).value
        assert abs(rs_baseline(gt_data, gt_model, MeanShift("age", 0.0), 3000, seed=0).estimate - plain) <= 0.03

    def test_rs_tracks_shifted_mean(self, gt_data):
        from synthtest.shifts import rejection_sample
        out = rejection_sample(gt_data, MeanShift("age", 5.0), 3000, seed=0)
        assert out.column("age").mean() == pytest.approx(gt_data.column("age").mean() + 5.0, abs=1.0)

    def test_inputs_used(self, gt_data, gt_model):
        src, tgt = gt_data.take(np.arange(500)), gt_data.take(np.arange(500, 900))
        assert atc_predict(gt_model, src, tgt).inputs_used == UNLABELED_TARGET
        assert doc_predict(gt_model, src, tgt).inputs_used == UNLABELED_TARGET
        assert im_predict(gt_model, src, tgt, ["age"]).inputs_used == UNLABELED_TARGET
        assert ms_baseline(src, gt_model, "age", 1.0).inputs_used == NO_TARGET
        assert rs_baseline(src, gt_model, MeanShift("age", 1.0), 200).inputs_used == NO_TARGET
        assert bootstrap_interval(gt_model, src, None, B=5).inputs_used == NO_TARGET
        assert source_all(gt_model, src).inputs_used == NO_TARGET

    def test_estimates_in_unit_interval(self, gt_data, gt_model):
        src, tgt = gt_data.take(np.arange(500)), gt_data.take(np.arange(500, 900))
        for res in (atc_predict(gt_model, src, tgt), doc_predict(gt_model, src, tgt),
                    im_predict(gt_model, src, tgt), source_all(gt_model, src)):
            assert 0.0 <= res.estimate <= 1.0
