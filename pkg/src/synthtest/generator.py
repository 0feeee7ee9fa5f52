"""Gaussian-copula conditional generator and the bootstrap generator ensemble.

Each feature gets a marginal model; the dependence between features lives in the
correlation matrix of their latent normal scores. Categorical features occupy
contiguous intervals of the latent axis, so conditioning on a category, an interval
or a fixed continuous value is a (truncated) conditional-Gaussian problem that can
be solved exactly instead of by filtering unconditional draws.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats

from . import errors, kernels
from .data import (CategoryEquals, Dataset, Interval, Neighborhood, Schema, SubgroupSpec,
                   encode_value, subgroup_filter)
from .metrics import Metric, metric_value
from .utils import derive_seed

TAIL_LIMIT = 8.0          # tail extension stops this many feature sds past the data
REFINE_ITERS = 30         # stochastic-EM iterations for categorical latents
MULTI_BOX_SWEEPS = 25     # Gibbs sweeps when more than one latent is box-constrained
_U_EPS = 1e-15


def _ndtri(u):
    return special.ndtri(np.clip(u, _U_EPS, 1.0 - _U_EPS))


# -- marginals ---------------------------------------------------------------------------


class ContinuousMarginal:
    """Empirical quantile function with Gaussian tails past the observed range.

    Plotting positions ``(i - 0.5) / n`` anchor the sorted values; between them the
    quantile function interpolates linearly, outside them a half-normal with the
    feature's standard deviation takes over.
    """

    kind = "continuous"

    def __init__(self, values, sd=None):
        v = np.sort(np.asarray(values, dtype=np.float64))
        if v.size == 0:
            raise errors.EmptyDataset("cannot fit a marginal to zero rows")
        self.values = v
        n = v.size
        self.pp = (np.arange(1, n + 1) - 0.5) / n
        if sd is None:
            sd = float(np.std(v, ddof=1)) if n > 1 else 0.0
        self.sd = float(sd)

    @property
    def lo(self) -> float:
        return float(self.values[0])

    @property
    def hi(self) -> float:
        return float(self.values[-1])

    def ppf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        v, pp, sd = self.values, self.pp, self.sd
        out = np.interp(u, pp, v)
        low = u < pp[0]
        if np.any(low):
            z = _ndtri(u[low] / (2 * pp[0]))
            out[low] = v[0] + sd * np.maximum(z, -TAIL_LIMIT)
        high = u > pp[-1]
        if np.any(high):
            z = _ndtri((1.0 - u[high]) / (2 * (1.0 - pp[-1])))
            out[high] = v[-1] - sd * np.maximum(z, -TAIL_LIMIT)
        return out

    def cdf_bounds(self, x):
        """Return (left, right) limits of the CDF at ``x``.

        They differ only where ``x`` is a repeated data value (an atom of the
        marginal); ``{u : ppf(u) < x}`` is ``[0, left)`` and ``{u : ppf(u) <= x}``
        is ``[0, right]``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        v, pp, sd = self.values, self.pp, self.sd
        left = np.empty_like(x)
        right = np.empty_like(x)
        i_lo = np.searchsorted(v, x, side="left")
        i_hi = np.searchsorted(v, x, side="right")
        inside = (x >= v[0]) & (x <= v[-1])
        tie = inside & (i_hi > i_lo)
        left[tie] = pp[i_lo[tie]]
        right[tie] = pp[i_hi[tie] - 1]
        gap = inside & ~tie
        if np.any(gap):
            k = i_lo[gap]
            t = (x[gap] - v[k - 1]) / (v[k] - v[k - 1])
            left[gap] = right[gap] = pp[k - 1] + t * (pp[k] - pp[k - 1])
        below = x < v[0]
        above = x > v[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            if sd > 0:
                left[below] = right[below] = 2 * pp[0] * special.ndtr((x[below] - v[0]) / sd)
                left[above] = right[above] = 1.0 - 2 * (1.0 - pp[-1]) * special.ndtr((v[-1] - x[above]) / sd)
            else:
                left[below] = right[below] = 0.0
                left[above] = right[above] = 1.0
        return left, right

    def cdf(self, x) -> np.ndarray:
        left, right = self.cdf_bounds(x)
        return 0.5 * (left + right)

    def check_support(self, x, feature: str) -> None:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        span = TAIL_LIMIT * self.sd
        bad = (x < self.lo - span) | (x > self.hi + span)
        if np.any(bad):
            raise errors.ConditionOutOfSupport(
                f"{feature}={float(x[bad][0]):g} lies beyond the tail extension "
                f"[{self.lo - span:g}, {self.hi + span:g}]")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": self.values.tolist(), "sd": self.sd}


class CategoricalMarginal:
    """Laplace-smoothed category probabilities laid out as consecutive intervals of [0, 1].

    ``order`` lists category codes in the order their intervals appear on the
    latent axis (declared order by default).
    """

    kind = "categorical"

    def __init__(self, probs, order=None):
        p = np.asarray(probs, dtype=np.float64)
        self.probs = p
        m = p.size
        self.order = np.arange(m) if order is None else np.asarray(order, dtype=np.int64)
        if sorted(self.order.tolist()) != list(range(m)):
            raise errors.ConfigError("category order must be a permutation of the codes")
        self.position = np.argsort(self.order)
        edges = np.concatenate([[0.0], np.cumsum(p[self.order])])
        edges[-1] = 1.0
        self.edges = edges

    @classmethod
    def fit(cls, codes, m: int, pseudo: float = 1.0, weights=None, order=None) -> "CategoricalMarginal":
        counts = np.bincount(np.asarray(codes, dtype=np.int64), weights=weights, minlength=m).astype(float)
        return cls((counts + pseudo) / (counts.sum() + pseudo * m), order)

    @property
    def n_categories(self) -> int:
        return self.probs.size

    def ppf(self, u) -> np.ndarray:
        k = np.searchsorted(self.edges, np.asarray(u, dtype=np.float64), side="right") - 1
        return self.order[np.clip(k, 0, self.n_categories - 1)].astype(np.float64)

    def bounds(self, codes):
        """Probability-scale interval (low, high) of each category code."""
        k = self.position[np.asarray(codes, dtype=np.int64)]
        return self.edges[k], self.edges[k + 1]

    def latent_bounds(self, codes):
        k = self.position[np.asarray(codes, dtype=np.int64)]
        lo = np.where(k > 0, _ndtri(self.edges[k]), -np.inf)
        hi = np.where(k < self.n_categories - 1, _ndtri(self.edges[k + 1]), np.inf)
        return lo, hi

    def to_dict(self) -> dict:
        return {"kind": self.kind, "probs": self.probs.tolist(), "order": self.order.tolist()}


def _marginal_from_dict(d: Mapping):
    if d["kind"] == "continuous":
        return ContinuousMarginal(d["values"], sd=d["sd"])
    return CategoricalMarginal(d["probs"], d.get("order"))


# -- latent correlation helpers ----------------------------------------------------------


def _correlation(Z, frozen) -> np.ndarray:
    """Pearson correlation of latent columns; frozen (single-valued) columns are uncorrelated."""
    d = Z.shape[1]
    sd = Z.std(axis=0)
    live = (sd > 1e-12) & ~frozen
    R = np.eye(d)
    if np.count_nonzero(live) > 1:
        sub = np.corrcoef(Z[:, live], rowvar=False)
        R[np.ix_(live, live)] = sub
        np.fill_diagonal(R, 1.0)
    return 0.5 * (R + R.T)


def _shrink(R, lam: float) -> np.ndarray:
    S = (1.0 - lam) * R + lam * np.eye(R.shape[0])
    np.fill_diagonal(S, 1.0)
    return S


def _gibbs_coefficients(S, targets, given):
    """Conditional-mean coefficients and sds of each target given the other ``given`` columns."""
    d = S.shape[0]
    t = len(targets)
    coef = np.zeros((t, d))
    sd = np.ones(t)
    given = list(given)
    P = np.linalg.inv(S[np.ix_(given, given)])
    pos = {g: i for i, g in enumerate(given)}
    for k, j in enumerate(targets):
        r = pos[j]
        others = [g for g in given if g != j]
        coef[k, others] = -P[r, [pos[g] for g in others]] / P[r, r]
        sd[k] = 1.0 / math.sqrt(P[r, r])
    return coef, sd


# -- conditioning ------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionSpec:
    """Fixed feature values. A value may be a scalar or one value per generated row."""

    items: tuple = ()

    def __post_init__(self):
        names = [k for k, _ in self.items]
        if len(set(names)) != len(names):
            raise errors.ConfigError("condition features must be distinct")

    @classmethod
    def of(cls, mapping: Mapping) -> "ConditionSpec":
        return cls(tuple(mapping.items()))

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.items)


class Generator:
    """Interface for anything that can synthesize rows restricted to a subgroup."""

    schema: Schema

    def sample(self, n: int, seed: int) -> Dataset:
        raise NotImplementedError

    def sample_subgroup(self, spec: SubgroupSpec, n: int, seed: int) -> Dataset:
        raise NotImplementedError


class ReplayGenerator(Generator):
    """Memorizes a dataset and hands back its rows; useful as a sanity baseline."""

    def __init__(self, data: Dataset):
        self.schema = data.schema
        self.data = data

    def sample(self, n: int, seed: int) -> Dataset:
        return self.data

    def sample_subgroup(self, spec: SubgroupSpec, n: int, seed: int) -> Dataset:
        return subgroup_filter(self.data, spec)


class CopulaGenerator(Generator):
    """Fitted Gaussian copula. Build with :func:`fit_copula` or :meth:`from_dict`."""

    def __init__(self, schema: Schema, marginals: Sequence, sigma, lam: float, seed: int,
                 config: Mapping | None = None):
        self.schema = schema
        self.marginals = tuple(marginals)
        sigma = np.array(sigma, dtype=np.float64)
        sigma.setflags(write=False)
        self.sigma = sigma
        self.lam = float(lam)
        self.seed = int(seed)
        self.config = dict(config or {})
        self._chol = np.linalg.cholesky(sigma)
        self._prec = np.linalg.inv(sigma)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    # -- unconditional ----------------------------------------------------------------

    def decode(self, Z) -> Dataset:
        """Map latent rows to data rows through Φ and the inverse marginals."""
        Z = np.asarray(Z, dtype=np.float64)
        U = special.ndtr(Z)
        X = np.empty_like(Z)
        for j, m in enumerate(self.marginals):
            X[:, j] = m.ppf(U[:, j])
        return Dataset(self.schema, X)

    def sample_latent(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise errors.ConfigError("n must be >= 1")
        eps = np.random.default_rng(seed).standard_normal((n, self.dim))
        return eps @ self._chol.T

    def sample(self, n: int, seed: int, return_latent: bool = False):
        Z = self.sample_latent(n, seed)
        ds = self.decode(Z)
        return (ds, Z) if return_latent else ds

    # -- constrained ------------------------------------------------------------------

    def _constrained_latent(self, n: int, seed: int, fixed: Mapping, boxes: Mapping,
                            sweeps: int | None = None) -> np.ndarray:
        """Latent draws with some coordinates fixed and others confined to boxes.

        ``fixed`` maps column -> latent values (n,); ``boxes`` maps column -> (lo, hi)
        latent bounds of shape (n,). Box coordinates come from a Gibbs sampler on the
        truncated conditional Gaussian; free coordinates from the exact conditional
        Gaussian given everything constrained.
        """
        if n < 1:
            raise errors.ConfigError("n must be >= 1")
        rng = np.random.default_rng(seed)
        eps = rng.standard_normal((n, self.dim))
        if not fixed and not boxes:
            return eps @ self._chol.T
        S = self.sigma
        F = sorted(fixed)
        B = sorted(boxes)
        A = F + B
        free = [j for j in range(self.dim) if j not in set(A)]
        Z = np.zeros((n, self.dim))
        for j in F:
            Z[:, j] = fixed[j]
        if B:
            lo = np.column_stack([np.broadcast_to(boxes[j][0], (n,)) for j in B]).astype(float)
            hi = np.column_stack([np.broadcast_to(boxes[j][1], (n,)) for j in B]).astype(float)
            if F:
                start = Z[:, F] @ np.linalg.solve(S[np.ix_(F, F)], S[np.ix_(F, B)])
            else:
                start = np.zeros((n, len(B)))
            Z[:, B] = np.clip(start, lo, hi)
            coef, csd = _gibbs_coefficients(S, B, A)
            if sweeps is None:
                sweeps = 1 if len(B) == 1 else MULTI_BOX_SWEEPS
            uniforms = rng.random((sweeps, n, len(B)))
            Z = kernels.gibbs_truncnorm(Z, np.array(B), coef, csd, lo, hi, uniforms)
        if free:
            S_aa = S[np.ix_(A, A)]
            S_au = S[np.ix_(A, free)]
            W = np.linalg.solve(S_aa, S_au)
            cov = S[np.ix_(free, free)] - S_au.T @ W
            L = np.linalg.cholesky(0.5 * (cov + cov.T))
            Z[:, free] = Z[:, A] @ W + eps[:, free] @ L.T
        return Z

    def _fixed_latent(self, j: int, value, n: int):
        """Latent representation of a fixed value: a point (continuous) or a box (categorical)."""
        feat = self.schema.features[j]
        m = self.marginals[j]
        if feat.is_continuous:
            v = np.broadcast_to(np.asarray(value, dtype=np.float64), (n,))
            m.check_support(v, feat.name)
            return "point", _ndtri(m.cdf(v)), v
        vals = np.broadcast_to(np.asarray(value, dtype=object), (n,))
        codes = np.array([encode_value(feat, x) for x in vals], dtype=np.int64)
        return "box", m.latent_bounds(codes), codes.astype(np.float64)

    def sample_conditional(self, cond: ConditionSpec | Mapping, n: int, seed: int,
                           return_latent: bool = False):
        """Sample rows with the features in ``cond`` held at the given values."""
        if not isinstance(cond, ConditionSpec):
            cond = ConditionSpec.of(cond)
        fixed, boxes, exact = {}, {}, {}
        for name, value in cond.items:
            j = self.schema.index(name)
            how, lat, out = self._fixed_latent(j, value, n)
            (fixed if how == "point" else boxes)[j] = lat
            exact[j] = out
        Z = self._constrained_latent(n, seed, fixed, boxes)
        ds = self.decode(Z)
        if exact:
            X = ds.values.copy()
            for j, v in exact.items():
                X[:, j] = v
            ds = Dataset(self.schema, X)
        return (ds, Z) if return_latent else ds

    def _subgroup_boxes(self, spec: SubgroupSpec):
        """Per-column probability-scale boxes implied by the atoms of ``spec``."""
        ubox: dict[int, list[float]] = {}
        clip: dict[int, list[float]] = {}

        def narrow(j, a, b):
            cur = ubox.setdefault(j, [0.0, 1.0])
            cur[0] = max(cur[0], a)
            cur[1] = min(cur[1], b)

        def cont_range(j, low, high, closed_low=True, closed_high=True):
            m = self.marginals[j]
            a = 0.0 if low == -math.inf else m.cdf_bounds(low)[0 if closed_low else 1][0]
            b = 1.0 if high == math.inf else m.cdf_bounds(high)[1 if closed_high else 0][0]
            narrow(j, a, b)
            c = clip.setdefault(j, [-math.inf, math.inf])
            c[0] = max(c[0], low)
            c[1] = min(c[1], high)

        def category(j, value):
            feat = self.schema.features[j]
            a, b = self.marginals[j].bounds([encode_value(feat, value)])
            narrow(j, float(a[0]), float(b[0]))

        for atom in spec.atoms:
            if isinstance(atom, CategoryEquals):
                j = self.schema.index(atom.feature)
                if self.schema.features[j].is_continuous:
                    raise errors.KindMismatch(f"CategoryEquals on continuous feature {atom.feature!r}")
                category(j, atom.value)
            elif isinstance(atom, Interval):
                j = self.schema.index(atom.feature)
                if not self.schema.features[j].is_continuous:
                    raise errors.NotContinuous(f"Interval on non-continuous feature {atom.feature!r}")
                cont_range(j, atom.low, atom.high, atom.closed_low, atom.closed_high)
            elif isinstance(atom, Neighborhood):
                for name, value in atom.center.items():
                    if name == self.schema.label:
                        continue
                    j = self.schema.index(name)
                    if self.schema.features[j].is_continuous:
                        if math.isfinite(atom.radius):
                            half = atom.radius * atom.scales.get(name, 1.0)
                            cont_range(j, float(value) - half, float(value) + half)
                    else:
                        category(j, value)
            else:
                raise errors.ConfigError(f"unsupported subgroup atom {atom!r}")
        for j, (a, b) in ubox.items():
            if not b > a:
                raise errors.EmptyConditional(
                    f"subgroup {spec.describe()!r} has no mass under the fitted {self.schema.names[j]!r} marginal")
        return ubox, clip

    def sample_subgroup(self, spec: SubgroupSpec, n: int, seed: int, max_draws: int | None = None) -> Dataset:
        """Draw ``n`` rows from the generator restricted to ``spec``.

        Category and interval atoms are imposed exactly through latent boxes; rows
        that still fail the predicate (open bounds, neighborhood balls) are dropped
        and replaced from further seeded batches.
        """
        ubox, clip = self._subgroup_boxes(spec)
        boxes = {j: (_ndtri(a) if a > 0 else -math.inf, _ndtri(b) if b < 1 else math.inf)
                 for j, (a, b) in ubox.items()}
        budget = max_draws if max_draws is not None else 200 * n + 20_000
        parts, have, drawn, batch = [], 0, 0, n
        b = 0
        while have < n:
            if drawn >= budget:
                raise errors.NeighborhoodStall(
                    f"only {have} of {n} rows satisfied {spec.describe()!r} after {drawn} draws")
            s = seed if b == 0 else derive_seed(seed, b)
            Z = self._constrained_latent(batch, s, {}, {j: (np.full(batch, lo), np.full(batch, hi))
                                                        for j, (lo, hi) in boxes.items()})
            ds = self.decode(Z)
            if clip:
                X = ds.values.copy()
                for j, (lo, hi) in clip.items():
                    X[:, j] = np.clip(X[:, j], lo, hi)
                ds = Dataset(self.schema, X)
            keep = ds.take(np.flatnonzero(spec.mask(ds)))
            parts.append(keep)
            have += len(keep)
            drawn += batch
            rate = max(have / drawn, 1e-3)
            batch = int(min(max(64, 1.2 * (n - have) / rate), 1_000_000))
            b += 1
        out = Dataset.concat(parts) if len(parts) > 1 else parts[0]
        out = out.take(np.arange(n))
        return Dataset(self.schema, out.values)

    # -- latent geometry --------------------------------------------------------------

    def latent_radius(self, latent) -> np.ndarray | float:
        """Whitened radius sqrt(z' Σ^-1 z) of one latent vector or a stack of them."""
        z = np.asarray(latent, dtype=np.float64)
        if z.shape[-1] != self.dim:
            raise errors.DimensionMismatch(f"latent has length {z.shape[-1]}, expected {self.dim}")
        r2 = np.einsum("...i,ij,...j->...", z, self._prec, z)
        r = np.sqrt(np.maximum(r2, 0.0))
        return float(r) if r.ndim == 0 else r

    def support_radius(self, alpha: float) -> float:
        """Radius of the latent ball holding probability ``alpha``."""
        return float(math.sqrt(stats.chi2.ppf(alpha, self.dim)))

    # -- serialization ----------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "schema_sha256": self.schema.digest(),
            "marginals": [m.to_dict() for m in self.marginals],
            "sigma": self.sigma.ravel().tolist(),
            "dim": self.dim,
            "lambda": self.lam,
            "seed": self.seed,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CopulaGenerator":
        schema = Schema.from_dict(d["schema"])
        if d.get("schema_sha256") not in (None, schema.digest()):
            raise errors.SchemaError("generator document schema hash does not match its schema")
        k = int(d["dim"])
        sigma = np.array(d["sigma"], dtype=np.float64).reshape(k, k)
        return cls(schema, [_marginal_from_dict(m) for m in d["marginals"]], sigma,
                   d["lambda"], d["seed"], d.get("config"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CopulaGenerator":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise errors.ConfigError(f"generator file not found: {path}") from None
        except (KeyError, ValueError) as exc:
            raise errors.ConfigError(f"malformed generator document: {exc}") from None


def label_order(codes, labels, m: int, pseudo: float = 1.0) -> np.ndarray:
    """Category codes sorted by their smoothed positive-label rate (ties keep declared order)."""
    codes = np.asarray(codes, dtype=np.int64)
    pos = np.bincount(codes, weights=np.asarray(labels, dtype=np.float64), minlength=m)
    cnt = np.bincount(codes, minlength=m)
    den = cnt + 2 * pseudo
    # an unseen category without smoothing sits at the neutral rate
    rate = np.divide(pos + pseudo, den, out=np.full(m, 0.5), where=den > 0)
    return np.argsort(rate, kind="stable")


def fit_copula(data: Dataset, lam: float = 0.05, seed: int = 0, pseudo: float = 1.0,
               refine_iters: int = REFINE_ITERS, order_by_label: bool = True) -> CopulaGenerator:
    """Fit marginals and the shrunk latent correlation.

    Continuous scores are normal scores of mid-ranks. Categorical scores start as a
    seeded uniform draw inside the category's interval and are then refined by Gibbs
    sweeps of the truncated conditional normal under the current correlation, which
    removes the attenuation that independent dequantization would cause. The final
    correlation averages the second half of the refinement iterations.

    With a binary label and ``order_by_label``, each categorical predictor lays its
    categories on the latent axis in order of their positive-label rate, so a
    category effect on the label becomes monotone along the axis.
    """
    if len(data) == 0:
        raise errors.EmptyDataset("cannot fit a generator to an empty dataset")
    if not 0.0 <= lam < 1.0:
        raise errors.BadHyper(f"shrinkage must lie in [0, 1), got {lam}")
    schema = data.schema
    n, d = data.values.shape
    rng = np.random.default_rng(seed)
    marginals = []
    Z = np.empty((n, d))
    frozen = np.zeros(d, dtype=bool)
    cat_cols, lo_b, hi_b = [], [], []
    binary_label = schema.label_feature.n_categories == 2
    for j, feat in enumerate(schema.features):
        col = data.values[:, j]
        frozen[j] = np.all(col == col[0])
        if feat.is_continuous:
            marginals.append(ContinuousMarginal(col))
            Z[:, j] = _ndtri((stats.rankdata(col) - 0.5) / n)
        else:
            codes = col.astype(np.int64)
            order = None
            if order_by_label and binary_label and j != schema.label_index:
                order = label_order(codes, data.labels, feat.n_categories, pseudo)
            m = CategoricalMarginal.fit(codes, feat.n_categories, pseudo, order=order)
            marginals.append(m)
            a, b = m.bounds(codes)
            Z[:, j] = _ndtri(a + (b - a) * rng.random(n))
            cat_cols.append(j)
            lo, hi = m.latent_bounds(codes)
            lo_b.append(lo)
            hi_b.append(hi)

    def check(R):
        if lam == 0.0 and np.linalg.eigvalsh(R)[0] < 1e-10:
            raise errors.SingularCorrelation("latent scores are collinear; use a positive shrinkage")

    R = _correlation(Z, frozen)
    check(R)
    if cat_cols and refine_iters > 0 and d > 1:
        lo = np.column_stack(lo_b)
        hi = np.column_stack(hi_b)
        targets = np.array(cat_cols)
        acc = np.zeros((d, d))
        kept = 0
        for it in range(refine_iters):
            coef, csd = _gibbs_coefficients(_shrink(R, lam) if lam > 0 else R, cat_cols, range(d))
            Z = kernels.gibbs_truncnorm(Z, targets, coef, csd, lo, hi, rng.random((1, n, len(cat_cols))))
            R = _correlation(Z, frozen)
            if it >= refine_iters // 2:
                acc += R
                kept += 1
        R = acc / kept
        check(R)
    sigma = _shrink(R, lam)
    return CopulaGenerator(schema, marginals, sigma, lam, seed,
                           {"lambda": lam, "seed": seed, "pseudo": pseudo, "refine_iters": refine_iters,
                            "order_by_label": order_by_label})


# -- ensemble ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorEnsemble:
    members: tuple

    def __post_init__(self):
        if not self.members:
            raise errors.ConfigError("an ensemble needs at least one member")
        if any(m.schema != self.members[0].schema for m in self.members):
            raise errors.SchemaError("ensemble members must share one schema")

    @property
    def K(self) -> int:
        return len(self.members)

    @property
    def schema(self) -> Schema:
        return self.members[0].schema


def save_generators(gen, directory) -> list[Path]:
    """Write one JSON document per member plus an ``ensemble.json`` manifest."""
    members = gen.members if isinstance(gen, GeneratorEnsemble) else (gen,)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = [f"member_{k:02d}.json" for k in range(len(members))]
    for g, name in zip(members, names):
        g.save(directory / name)
    (directory / "ensemble.json").write_text(
        json.dumps({"kind": "ensemble", "members": names}, sort_keys=True), encoding="utf-8")
    return [directory / n for n in names]


def load_generators(path) -> GeneratorEnsemble:
    """Load a directory written by :func:`save_generators`, or a single generator file."""
    path = Path(path)
    if path.is_file():
        return GeneratorEnsemble((CopulaGenerator.load(path),))
    manifest = path / "ensemble.json"
    if not manifest.exists():
        raise errors.ConfigError(f"no generator manifest in {path}")
    names = json.loads(manifest.read_text(encoding="utf-8"))["members"]
    return GeneratorEnsemble(tuple(CopulaGenerator.load(path / n) for n in names))


def fit_ensemble(data: Dataset, K: int, lam: float = 0.05, seed: int = 0, **kw) -> GeneratorEnsemble:
    """K=1 fits the data as is; otherwise member k fits a bootstrap resample drawn with seed+k."""
    if K < 1:
        raise errors.BadHyper("K must be >= 1")
    if K == 1:
        return GeneratorEnsemble((fit_copula(data, lam, seed, **kw),))
    n = len(data)
    members = []
    for k in range(K):
        idx = np.random.default_rng([seed + k, 1]).integers(0, n, n)
        members.append(fit_copula(data.take(idx), lam, seed + k, **kw))
    return GeneratorEnsemble(tuple(members))


@dataclass(frozen=True)
class EnsembleEstimate:
    mean: float
    std: float
    low: float
    high: float
    members: tuple = field(default=())
    degenerate: bool = False

    @property
    def interval(self) -> tuple[float, float]:
        return (self.low, self.high)


def ensemble_stats(values) -> EnsembleEstimate:
    """Mean, unbiased sd and the clipped mean ± 2 sd interval of member estimates."""
    v = np.asarray(values, dtype=np.float64)
    if np.all(v == v[0]):
        # identical members: avoid round-off in the mean and a spurious tiny sd
        mu = float(v[0])
        return EnsembleEstimate(mu, 0.0, mu, mu, tuple(v.tolist()), degenerate=v.size < 2)
    mu = math.fsum(v.tolist()) / v.size
    sd = float(np.std(v, ddof=1))
    return EnsembleEstimate(mu, sd, max(0.0, mu - 2 * sd), min(1.0, mu + 2 * sd), tuple(v.tolist()))


def member_seed(seed: int, k: int) -> int:
    """Sampling seed of ensemble member ``k``; member 0 keeps ``seed`` itself."""
    return seed if k == 0 else derive_seed(seed, k)


def ensemble_estimate(ens: GeneratorEnsemble | CopulaGenerator, f, spec: SubgroupSpec, metric: Metric,
                      n_per_member: int = 5000, seed: int = 0) -> EnsembleEstimate:
    """Evaluate ``f`` on each member's subgroup sample and combine.

    Each member draws its own synthetic set with :func:`member_seed`, so a
    one-member ensemble matches the plain generator.
    """
    if n_per_member < 1:
        raise errors.ConfigError("n_per_member must be >= 1")
    members = ens.members if isinstance(ens, GeneratorEnsemble) else (ens,)
    vals = []
    for k, g in enumerate(members):
        ds = g.sample_subgroup(spec, n_per_member, member_seed(seed, k))
        vals.append(metric_value(metric, ds, f.predict(ds))[0])
    return ensemble_stats(vals)
