import math

import numpy as np
import pytest
from scipy import stats

from synthtest import errors
from synthtest.data import CategoryEquals, Dataset, Feature, Schema, SubgroupSpec, category
from synthtest.generator import (ConditionSpec, CopulaGenerator, GeneratorEnsemble, ReplayGenerator,
                                 ensemble_estimate, ensemble_stats, fit_copula, fit_ensemble, load_generators,
                                 save_generators)
from synthtest.metrics import Metric

from conftest import gaussian_pair


class _Constant:
    def __init__(self, code):
        self.code = code

    def predict(self, ds):
        return np.full(len(ds), self.code, dtype=np.int64)


def _independent(n, seed):
    schema = Schema([Feature("a", "continuous"), Feature("b", "continuous"),
                     Feature("c", "categorical", ("p", "q", "r")), Feature("y", "binary")], "y")
    rng = np.random.default_rng(seed)
    vals = np.column_stack([rng.normal(size=n), rng.exponential(size=n), rng.integers(0, 3, n),
                            rng.integers(0, 2, n)]).astype(float)
    return Dataset(schema, vals)


class TestFit:
    def test_duplicated_column_correlation(self):
        schema = Schema([Feature("a", "continuous"), Feature("b", "continuous"), Feature("y", "binary")], "y")
        rng = np.random.default_rng(0)
        x = rng.normal(size=2000)
        ds = Dataset(schema, np.column_stack([x, x, rng.integers(0, 2, 2000)]))
        g = fit_copula(ds, lam=0.05, seed=0)
        # identical rank scores correlate at 1, shrunk to 1 - lambda
        assert g.sigma[0, 1] >= 0.94

    def test_duplicated_column_singular_without_shrinkage(self):
        schema = Schema([Feature("a", "continuous"), Feature("b", "continuous"), Feature("y", "binary")], "y")
        x = np.random.default_rng(0).normal(size=500)
        ds = Dataset(schema, np.column_stack([x, x, (x > 0).astype(float)]))
        with pytest.raises(errors.SingularCorrelation):
            fit_copula(ds, lam=0.0, seed=0)

    def test_independent_features_near_zero(self):
        g = fit_copula(_independent(10_000, 1), lam=0.05, seed=0)
        off = g.sigma[~np.eye(g.dim, dtype=bool)]
        assert np.max(np.abs(off)) <= 0.05

    @pytest.mark.parametrize("lam", [0.01, 0.05, 0.2])
    def test_positive_definite(self, gt_data, lam):
        g = fit_copula(gt_data, lam=lam, seed=0)
        assert np.allclose(g.sigma, g.sigma.T)
        assert np.allclose(np.diag(g.sigma), 1.0)
        assert np.linalg.eigvalsh(g.sigma).min() >= lam * (1 - 1e-9)

    def test_empty_data(self, toy_schema):
        with pytest.raises(errors.DataError):
            fit_copula(Dataset(toy_schema, np.empty((0, 5))))

    def test_categorical_probs_smoothed(self, gt_gen):
        for m in gt_gen.marginals:
            if hasattr(m, "probs"):
                assert abs(m.probs.sum() - 1.0) <= 1e-12
                assert np.all(m.probs > 0)


class TestSample:
    def test_uniform_mean(self):
        schema = Schema([Feature("u", "continuous"), Feature("y", "binary")], "y")
        rng = np.random.default_rng(2)
        ds = Dataset(schema, np.column_stack([rng.uniform(0, 100, 4000), rng.integers(0, 2, 4000)]))
        syn = fit_copula(ds, seed=0).sample(5000, 1)
        assert abs(syn.column("u").mean() - ds.column("u").mean()) <= 2.0

    def test_marginal_fidelity(self, gt_gen, gt_data):
        syn = gt_gen.sample(10_000, 3)
        for feat in gt_data.schema.features:
            if feat.is_continuous:
                assert stats.ks_2samp(syn.column(feat.name), gt_data.column(feat.name)).statistic <= 0.03
            else:
                m = feat.n_categories
                got = np.bincount(syn.codes(feat.name), minlength=m) / len(syn)
                want = np.bincount(gt_data.codes(feat.name), minlength=m) / len(gt_data)
                assert np.max(np.abs(got - want)) <= 0.02

    def test_same_seed_same_rows(self, gt_gen):
        assert gt_gen.sample(300, 9).equals(gt_gen.sample(300, 9))
        assert not gt_gen.sample(300, 9).equals(gt_gen.sample(300, 10))

    def test_latent_round_trip(self, gt_gen):
        ds, Z = gt_gen.sample(500, 4, return_latent=True)
        assert gt_gen.decode(Z).equals(ds)

    def test_empty_condition_is_plain_sampling(self, gt_gen):
        assert gt_gen.sample_conditional(ConditionSpec(), 400, 6).equals(gt_gen.sample(400, 6))


class TestConditional:
    def test_category_holds_everywhere(self, gt_gen):
        ds = gt_gen.sample_conditional({"group": "D"}, 2000, 0)
        assert np.all(ds.codes("group") == gt_gen.schema.feature("group").code("D"))

    def test_continuous_value_exact(self, gt_gen):
        ds = gt_gen.sample_conditional({"age": 61.25}, 500, 0)
        assert np.all(ds.column("age") == 61.25)

    def test_independent_latents_leave_others_unchanged(self):
        ds = gaussian_pair(5000, 0.0, 3)
        g = fit_copula(ds, lam=0.05, seed=0)
        g0 = CopulaGenerator(g.schema, g.marginals, np.eye(g.dim), g.lam, g.seed)
        cond = g0.sample_conditional({"a": 1.5}, 5000, 1)
        free = g0.sample(5000, 2)
        assert stats.ks_2samp(cond.column("b"), free.column("b")).pvalue > 0.01

    def test_median_condition_centres_correlated_feature(self):
        ds = gaussian_pair(5000, 0.6, 4)
        g = fit_copula(ds, lam=0.05, seed=0)
        out = g.sample_conditional({"a": float(np.median(ds.column("a")))}, 5000, 3)
        assert abs(out.column("b").mean() - np.median(ds.column("b"))) <= 0.05

    def test_out_of_support(self, gt_gen):
        with pytest.raises(errors.ConditionOutOfSupport):
            gt_gen.sample_conditional({"age": 1e6}, 10, 0)

    def test_duplicate_condition_features(self):
        with pytest.raises(errors.ConfigError):
            ConditionSpec((("age", 1.0), ("age", 2.0)))


class TestSubgroupSampling:
    def test_rows_satisfy_spec(self, gt_gen):
        spec = SubgroupSpec((CategoryEquals("group", "C"), CategoryEquals("region", "west")))
        ds = gt_gen.sample_subgroup(spec, 700, 0)
        assert len(ds) == 700
        assert np.all(spec.mask(ds))

    def test_unsatisfiable(self, gt_gen):
        spec = SubgroupSpec((CategoryEquals("group", "A"), CategoryEquals("group", "B")))
        with pytest.raises(errors.EmptyConditional):
            gt_gen.sample_subgroup(spec, 10, 0)

    def test_replay_returns_real_rows(self, toy):
        rep = ReplayGenerator(toy).sample_subgroup(category("color", "red"), 4, 0)
        assert set(map(tuple, rep.values)) <= set(map(tuple, toy.values))


class TestLatentGeometry:
    def test_origin(self, gt_gen):
        assert gt_gen.latent_radius(np.zeros(gt_gen.dim)) == 0.0

    def test_identity_norm(self):
        g = fit_copula(gaussian_pair(200, 0.0, 0), seed=0)
        g2 = CopulaGenerator(g.schema, g.marginals[:2], np.eye(2), g.lam, 0)
        assert g2.latent_radius([1.0, 1.0]) == pytest.approx(math.sqrt(2))

    def test_chi2_two_dim_quantile(self):
        g = fit_copula(gaussian_pair(200, 0.0, 0), seed=0)
        g2 = CopulaGenerator(g.schema, g.marginals[:2], np.eye(2), g.lam, 0)
        # P(r^2 <= 2) = 1 - exp(-1) for two degrees of freedom
        assert g2.support_radius(1 - math.exp(-1)) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_dimension_mismatch(self, gt_gen):
        with pytest.raises(errors.DimensionMismatch):
            gt_gen.latent_radius(np.zeros(gt_gen.dim + 1))


class TestSerialization:
    def test_bit_exact(self, gt_gen, tmp_path):
        gt_gen.save(tmp_path / "g.json")
        back = CopulaGenerator.load(tmp_path / "g.json")
        assert back.to_dict() == gt_gen.to_dict()
        assert back.sample(200, 1).equals(gt_gen.sample(200, 1))
        back.save(tmp_path / "g2.json")
        assert (tmp_path / "g.json").read_bytes() == (tmp_path / "g2.json").read_bytes()

    def test_ensemble_directory(self, gt_data, tmp_path):
        ens = fit_ensemble(gt_data.take(np.arange(1500)), 3, 0.05, 0)
        save_generators(ens, tmp_path / "ens")
        back = load_generators(tmp_path / "ens")
        assert back.K == 3
        assert all(a.to_dict() == b.to_dict() for a, b in zip(ens.members, back.members))

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(errors.ConfigError):
            load_generators(tmp_path)


class TestEnsemble:
    def test_stats_example(self):
        st = ensemble_stats([0.8, 0.9, 1.0])
        assert st.mean == pytest.approx(0.9)
        assert st.std == pytest.approx(0.1)
        assert st.interval == pytest.approx((0.7, 1.0))

    def test_identical_members(self):
        st = ensemble_stats([0.83] * 5)
        assert st.std == 0.0
        assert st.interval == (0.83, 0.83)

    def test_single_member_flagged(self):
        st = ensemble_stats([0.7])
        assert st.degenerate and st.std == 0.0

    def test_mean_is_arithmetic_mean(self, gt_data, gt_model):
        ens = fit_ensemble(gt_data.take(np.arange(2000)), 3, 0.05, 0)
        est = ensemble_estimate(ens, gt_model, category("group", "B"), Metric(), 500, 2)
        assert est.mean == pytest.approx(sum(est.members) / 3, abs=1e-15)

    def test_one_member_matches_generator(self, gt_data, gt_model):
        small = gt_data.take(np.arange(2000))
        ens = fit_ensemble(small, 1, 0.05, 0)
        spec = category("group", "C")
        a = ensemble_estimate(ens, gt_model, spec, Metric(), 400, 5)
        b = ensemble_estimate(fit_copula(small, 0.05, 0), gt_model, spec, Metric(), 400, 5)
        assert a == b

    @pytest.mark.parametrize("K", [1, 5, 10])
    def test_sizes_accepted(self, gt_data, K):
        assert fit_ensemble(gt_data.take(np.arange(600)), K, 0.05, 0).K == K

    def test_constant_data_zero_spread(self):
        schema = Schema([Feature("a", "continuous"), Feature("c", "categorical", ("p", "q")),
                         Feature("y", "binary")], "y")
        ds = Dataset(schema, np.tile([3.0, 1.0, 1.0], (50, 1)))
        ens = fit_ensemble(ds, 5, 0.05, 0, pseudo=0.0)
        first = ens.members[0].to_dict()
        for m in ens.members:
            d = m.to_dict()
            assert d["marginals"] == first["marginals"] and d["sigma"] == first["sigma"]
        est = ensemble_estimate(ens, _Constant(1), SubgroupSpec(()), Metric(), 1000, 0)
        assert est.std == 0.0 and est.interval == (1.0, 1.0)

    def test_members_share_schema(self, gt_gen, toy_schema):
        other = CopulaGenerator(toy_schema, gt_gen.marginals[:5], np.eye(5), 0.05, 0)
        with pytest.raises(errors.SchemaError):
            GeneratorEnsemble((gt_gen, other))
