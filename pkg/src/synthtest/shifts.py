"""Marginal distribution shifts, prior-knowledge sampling and rejection-sampled oracles.

A shift replaces the marginal of a feature subset while the conditional distribution
of the remaining features given that subset stays at the generator's fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from . import errors, kernels
from .data import Dataset, Schema, empirical_quantile
from .generator import CopulaGenerator, GeneratorEnsemble, ensemble_stats, member_seed
from .metrics import ACCURACY, Metric, metric_value
from .utils import derive_seed

MINUS = "-"
PLUS_MINUS = "±"
PLUS = "+"
BUCKETS = (MINUS, PLUS_MINUS, PLUS)

GRID_POINTS = 21
STALL_BUDGET = 1_000_000
STALL_RATE = 1e-4


# -- shift definitions ---------------------------------------------------------------------


@dataclass(frozen=True)
class MeanShift:
    feature: str
    s: float

    def validate(self, schema: Schema):
        if not schema.feature(self.feature).is_continuous:
            raise errors.KindMismatch(f"mean shift needs a continuous feature, {self.feature!r} is not")

    @property
    def features(self):
        return (self.feature,)


@dataclass(frozen=True)
class LogitShift:
    feature: str
    s: float

    def validate(self, schema: Schema):
        if schema.feature(self.feature).kind != "binary":
            raise errors.KindMismatch(f"logit shift needs a binary feature, {self.feature!r} is not")

    @property
    def features(self):
        return (self.feature,)


@dataclass(frozen=True)
class CategoricalReweight:
    feature: str
    category: str
    q: float

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise errors.ConfigError(f"new probability must lie strictly inside (0, 1), got {self.q}")

    def validate(self, schema: Schema):
        feat = schema.feature(self.feature)
        if feat.is_continuous:
            raise errors.KindMismatch(f"categorical reweight on continuous feature {self.feature!r}")
        feat.code(self.category)

    @property
    def features(self):
        return (self.feature,)


def shifted_prevalence(p0: float, s: float) -> float:
    """sigmoid(logit(p0) + s); positive ``s`` raises the prevalence."""
    if not 0.0 < p0 < 1.0:
        raise errors.DegenerateBase(f"base prevalence {p0} leaves no room for a logit shift")
    if s == 0:
        return float(p0)
    e = math.exp(min(max(s, -700.0), 700.0))
    return float(p0 * e / (1.0 - p0 + p0 * e))


def reweight_probs(p0, target: int, q: float) -> np.ndarray:
    """Set category ``target`` to ``q`` and rescale the others to fill ``1 - q``."""
    p0 = np.asarray(p0, dtype=np.float64)
    rest = 1.0 - p0[target]
    if rest <= 0:
        raise errors.DegenerateBase("the target category already carries all mass")
    out = p0 * ((1.0 - q) / rest)
    out[target] = q
    return out


def shifted_probs(p0, shift, schema: Schema) -> np.ndarray:
    p0 = np.asarray(p0, dtype=np.float64)
    if isinstance(shift, LogitShift):
        p1 = shifted_prevalence(float(p0[1]), shift.s)
        return np.array([1.0 - p1, p1])
    feat = schema.feature(shift.feature)
    return reweight_probs(p0, feat.code(shift.category), shift.q)


# -- priors --------------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalPrior:
    feature: str
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise errors.ConfigError("normal prior needs sd > 0")

    @property
    def features(self):
        return (self.feature,)


@dataclass(frozen=True)
class BernoulliPrior:
    feature: str
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise errors.ConfigError("Bernoulli prior needs p in (0, 1)")

    @property
    def features(self):
        return (self.feature,)


@dataclass(frozen=True, eq=False)
class EmpiricalPrior:
    """Observed target-domain rows of one or more features, resampled jointly.

    ``values`` holds the rows in the encoded form of :class:`Dataset` (codes for
    categorical features).
    """

    features: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] == 0 or v.shape[1] != len(self.features):
            raise errors.ConfigError("empirical prior needs a non-empty (rows, features) array")
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dataset(cls, ds: Dataset, features: Sequence[str]) -> "EmpiricalPrior":
        return cls(tuple(features), ds.values[:, [ds.schema.index(f) for f in features]])


@dataclass(frozen=True)
class PriorSpec:
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        names = self.features
        if not names:
            raise errors.ConfigError("a prior must observe at least one feature")
        if len(set(names)) != len(names):
            raise errors.ConfigError("prior features must be distinct")

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(f for it in self.items for f in it.features)

    def validate(self, schema: Schema):
        for it in self.items:
            for f in it.features:
                feat = schema.feature(f)
                if isinstance(it, NormalPrior) and not feat.is_continuous:
                    raise errors.KindMismatch(f"normal prior on non-continuous feature {f!r}")
                if isinstance(it, BernoulliPrior) and feat.kind != "binary":
                    raise errors.KindMismatch(f"Bernoulli prior on non-binary feature {f!r}")


# -- sampling under a shift ----------------------------------------------------------------


def _as_values(feat, codes):
    return np.asarray(feat.categories, dtype=object)[np.asarray(codes, dtype=np.int64)]


def shift_marginal(gen: CopulaGenerator, shift, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` values of the shifted feature (floats, or category strings)."""
    shift.validate(gen.schema)
    j = gen.schema.index(shift.feature)
    feat = gen.schema.features[j]
    marg = gen.marginals[j]
    rng = np.random.default_rng(seed)
    if isinstance(shift, MeanShift):
        return marg.ppf(rng.random(n)) + shift.s
    p = shifted_probs(marg.probs, shift, gen.schema)
    edges = np.concatenate([[0.0], np.cumsum(p)])
    edges[-1] = 1.0
    codes = np.clip(np.searchsorted(edges, rng.random(n), side="right") - 1, 0, p.size - 1)
    return _as_values(feat, codes)


def generate_shifted(gen: CopulaGenerator, shift, n: int, seed: int) -> Dataset:
    values = shift_marginal(gen, shift, n, derive_seed(seed, 0))
    return gen.sample_conditional({shift.feature: values}, n, derive_seed(seed, 1))


def draw_prior(schema: Schema, prior: PriorSpec, n: int, seed: int) -> dict:
    """Independent draws per prior item; an empirical item resamples whole rows."""
    prior.validate(schema)
    out = {}
    for i, it in enumerate(prior.items):
        rng = np.random.default_rng(derive_seed(seed, 0, i))
        if isinstance(it, NormalPrior):
            out[it.feature] = rng.normal(it.mean, it.sd, n)
        elif isinstance(it, BernoulliPrior):
            out[it.feature] = _as_values(schema.feature(it.feature), (rng.random(n) < it.p).astype(int))
        else:
            rows = it.values[rng.integers(0, it.values.shape[0], n)]
            for k, f in enumerate(it.features):
                feat = schema.feature(f)
                out[f] = rows[:, k] if feat.is_continuous else _as_values(feat, rows[:, k])
    return out


def generate_with_prior(gen: CopulaGenerator, prior: PriorSpec, n: int, seed: int) -> Dataset:
    cond = draw_prior(gen.schema, prior, n, derive_seed(seed, 0))
    return gen.sample_conditional(cond, n, derive_seed(seed, 1))


# -- density estimation --------------------------------------------------------------------


def silverman_bandwidth(x, d: int = 1) -> float:
    """Per-dimension Silverman factor ``(4 / ((d + 2) n))^(1 / (d + 4))`` times the sd."""
    x = np.asarray(x, dtype=np.float64)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    if sd <= 0:
        sd = 1.0
    return sd * (4.0 / ((d + 2) * x.size)) ** (1.0 / (d + 4))


class ProductKDE:
    """Product kernel density: Gaussian on continuous columns, Aitchison-Aitken on discrete ones.

    The discrete smoothing weight ``(m - 1) / (n + m)`` makes a single discrete
    column's density equal its Laplace-smoothed frequency table.
    """

    GRID = 4096

    def __init__(self, values, continuous: Sequence[bool], n_categories: Sequence[int], bandwidth="auto"):
        X = np.asarray(values, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        self.X = X
        n = X.shape[0]
        self.cont = np.array([j for j, c in enumerate(continuous) if c], dtype=np.int64)
        self.disc = np.array([j for j, c in enumerate(continuous) if not c], dtype=np.int64)
        dc = len(self.cont)
        if bandwidth == "auto":
            self.bw = np.array([silverman_bandwidth(X[:, j], dc) for j in self.cont])
        else:
            if not float(bandwidth) > 0:
                raise errors.ConfigError("bandwidth must be positive or 'auto'")
            self.bw = np.full(dc, float(bandwidth))
        m = np.array([n_categories[j] for j in self.disc], dtype=np.float64)
        lam = (m - 1) / (n + m)
        self.same_w = 1.0 - lam
        self.diff_w = lam / np.maximum(m - 1, 1)
        self._grid = None
        if dc == 1 and len(self.disc) == 0 and n > 256:
            self._grid = self._binned_grid(X[:, 0], self.bw[0])

    def _binned_grid(self, x, h):
        """Density on a regular grid by linear binning and a direct kernel convolution."""
        g = np.linspace(x.min() - 8 * h, x.max() + 8 * h, self.GRID)
        step = g[1] - g[0]
        pos = (x - g[0]) / step
        i = np.minimum(np.floor(pos).astype(np.int64), self.GRID - 2)
        frac = pos - i
        counts = (np.bincount(i, 1.0 - frac, minlength=self.GRID)
                  + np.bincount(i + 1, frac, minlength=self.GRID))
        half = min(int(math.ceil(8 * h / step)), self.GRID - 1)
        offsets = np.arange(-half, half + 1) * step / h
        kern = np.exp(-0.5 * offsets ** 2) / (h * math.sqrt(2 * math.pi))
        dens = np.convolve(counts, kern, mode="same") / x.size
        return g, dens

    def _exact(self, Q) -> np.ndarray:
        return kernels.kde_mean(Q, self.X, self.cont, 1.0 / self.bw, self.disc, self.same_w, self.diff_w)

    def __call__(self, points) -> np.ndarray:
        Q = np.asarray(points, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q[:, None]
        if self._grid is None:
            return self._exact(Q)
        g, dens = self._grid
        q = Q[:, 0]
        out = np.interp(q, g, dens)
        outside = (q < g[0]) | (q > g[-1])
        if np.any(outside):
            out[outside] = self._exact(Q[outside])
        return out


def _kde_for(ds: Dataset, features, values=None, bandwidth="auto") -> ProductKDE:
    feats = [ds.schema.feature(f) for f in features]
    if values is None:
        values = ds.values[:, [ds.schema.index(f) for f in features]]
    return ProductKDE(values, [f.is_continuous for f in feats], [f.n_categories for f in feats], bandwidth)


def density_ratio(source: Dataset, shift, bandwidth="auto") -> np.ndarray:
    """Estimated p_shifted(x_c) / p_source(x_c) at every source row."""
    schema = source.schema
    if isinstance(shift, PriorSpec):
        shift.validate(schema)
        feats = list(shift.features)
        cols = [schema.index(f) for f in feats]
        Xc = source.values[:, cols]
        base = _kde_for(source, feats, bandwidth=bandwidth)(Xc)
        target = np.ones(len(source))
        for it in shift.items:
            if isinstance(it, NormalPrior):
                target *= stats.norm.pdf(source.column(it.feature), it.mean, it.sd)
            elif isinstance(it, BernoulliPrior):
                target *= np.where(source.codes(it.feature) == 1, it.p, 1.0 - it.p)
            else:
                sub = [feats.index(f) for f in it.features]
                kde = _kde_for(source, it.features, values=it.values, bandwidth=bandwidth)
                target *= kde(Xc[:, sub])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(base > 0, target / base, 0.0)
    shift.validate(schema)
    x = source.column(shift.feature)
    if isinstance(shift, MeanShift):
        kde = _kde_for(source, [shift.feature], bandwidth=bandwidth)
        base = kde(x)
        if shift.s == 0:
            return np.ones(len(source))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(base > 0, kde(x - shift.s) / base, 0.0)
    feat = schema.feature(shift.feature)
    m = feat.n_categories
    codes = x.astype(np.int64)
    p0 = (np.bincount(codes, minlength=m) + 1.0) / (len(source) + m)
    ratio = shifted_probs(p0, shift, schema) / p0
    if isinstance(shift, LogitShift) and shift.s == 0:
        ratio = np.ones(m)
    return ratio[codes]


def rejection_sample(source: Dataset, shift, n_s: int, bandwidth="auto", seed: int = 0) -> Dataset:
    """Draw ``n_s`` source rows (with replacement) distributed as the shifted population.

    Rows are proposed uniformly and accepted when their density ratio exceeds
    ``M * u`` with ``M`` the largest ratio over the source rows.
    """
    if len(source) == 0:
        raise errors.EmptyDataset("rejection sampling needs a non-empty source")
    if n_s < 1:
        raise errors.ConfigError("n_s must be >= 1")
    ratio = density_ratio(source, shift, bandwidth)
    M = float(ratio.max())
    if not math.isfinite(M) or M <= 0:
        raise errors.AcceptanceStall("the shifted density has no mass on the source rows")
    rng = np.random.default_rng(seed)
    n = len(source)
    taken = []
    have = drawn = 0
    rate = 1.0
    while have < n_s:
        if drawn >= STALL_BUDGET and have / drawn < STALL_RATE:
            raise errors.AcceptanceStall(
                f"acceptance rate {have / drawn:.2e} after {drawn} draws; the shift is too extreme for the source")
        batch = int(min(max(1024, 1.2 * (n_s - have) / max(rate, STALL_RATE)), 2_000_000))
        idx = rng.integers(0, n, batch)
        u = rng.random(batch)
        ok = idx[ratio[idx] > M * u]
        ok = ok[: n_s - have]
        taken.append(ok)
        have += ok.size
        drawn += batch
        rate = max(have / drawn, STALL_RATE)
    return source.take(np.concatenate(taken))


# -- buckets and sweeps ----------------------------------------------------------------------


def bucket_from_quartiles(q1: float, q3: float, shifted_mean: float) -> str:
    if shifted_mean < q1:
        return MINUS
    if shifted_mean > q3:
        return PLUS
    return PLUS_MINUS


def bucket_of(source: Dataset, feature: str, shifted_mean: float) -> str:
    q1 = empirical_quantile(source, feature, 0.25)
    q3 = empirical_quantile(source, feature, 0.75)
    return bucket_from_quartiles(q1, q3, shifted_mean)


def default_grid(values, points: int = GRID_POINTS) -> np.ndarray:
    """Uniform shifts that move the mean from the feature minimum to its maximum."""
    v = np.asarray(values, dtype=np.float64)
    mu = float(v.mean())
    return np.linspace(float(v.min()) - mu, float(v.max()) - mu, points)


@dataclass(frozen=True)
class CurvePoint:
    feature: str
    s: float
    bucket: str
    metric: str
    estimate: float
    std: float | None = None


def shift_for(schema: Schema, feature: str, s: float, category: str | None = None):
    """Shift family implied by the feature kind; for categorical features ``s`` is the new probability."""
    feat = schema.feature(feature)
    if feat.is_continuous:
        return MeanShift(feature, float(s))
    if feat.kind == "binary":
        return LogitShift(feature, float(s))
    if category is None:
        raise errors.ConfigError(f"sweeping categorical {feature!r} needs a target category")
    return CategoricalReweight(feature, category, float(s))


def sensitivity_sweep(gen: CopulaGenerator | GeneratorEnsemble, f, feature: str, s_grid=None,
                      n: int = 5000, seed: int = 0, metric: Metric | None = None,
                      category: str | None = None) -> list[CurvePoint]:
    """Estimate ``metric`` of ``f`` on shifted synthetic data at every grid point.

    All grid points reuse one seed so neighbouring points differ only through the
    shift itself. With an ensemble each point carries the member sd.
    """
    metric = metric or Metric(ACCURACY)
    members = gen.members if isinstance(gen, GeneratorEnsemble) else (gen,)
    base = members[0]
    j = base.schema.index(feature)
    feat = base.schema.features[j]
    if s_grid is None:
        if not feat.is_continuous:
            raise errors.ConfigError("a default grid exists only for continuous features")
        s_grid = default_grid(base.marginals[j].values)
    grid = sorted(float(s) for s in s_grid)
    if not grid:
        raise errors.ConfigError("shift grid is empty")
    if feat.is_continuous:
        vals = base.marginals[j].values
        q1, q3 = (float(np.quantile(vals, q, method="linear")) for q in (0.25, 0.75))
        mu = float(vals.mean())
    curve = []
    for s in grid:
        shift = shift_for(base.schema, feature, s, category)
        ests = []
        for k, g in enumerate(members):
            ds = generate_shifted(g, shift, n, member_seed(seed, k))
            ests.append(metric_value(metric, ds, f.predict(ds))[0])
        st = ensemble_stats(ests)
        bucket = bucket_from_quartiles(q1, q3, mu + s) if feat.is_continuous else "NA"
        curve.append(CurvePoint(feature, s, bucket, metric.name, st.mean,
                                st.std if len(members) > 1 else None))
    return curve
