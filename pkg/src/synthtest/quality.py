"""Fidelity of synthetic data: kernel MMD, per-feature divergences, generator selection."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import errors, kernels
from .data import Dataset
from .generator import fit_copula
from .utils import derive_seed

MEDIAN_SUBSAMPLE = 4000
DEFAULT_BINS = 10
DEFAULT_CANDIDATES = tuple({"lambda": lam, "seed": s} for lam in (0.01, 0.05, 0.2) for s in (0, 1))


def encode_pair(A: Dataset, B: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """One-hot categoricals and continuous columns standardized on the pooled rows."""
    if A.schema != B.schema:
        raise errors.SchemaError("datasets must share a schema")
    XA, XB = [], []
    for j, feat in enumerate(A.schema.features):
        a, b = A.values[:, j], B.values[:, j]
        if feat.is_continuous:
            pooled = np.concatenate([a, b])
            mu, sd = pooled.mean(), pooled.std()
            sd = sd if sd > 0 else 1.0
            XA.append(((a - mu) / sd)[:, None])
            XB.append(((b - mu) / sd)[:, None])
        else:
            eye = np.eye(feat.n_categories)
            XA.append(eye[a.astype(np.int64)])
            XB.append(eye[b.astype(np.int64)])
    return np.hstack(XA), np.hstack(XB)


def _key(ds: Dataset):
    return (len(ds), hashlib.sha256(np.ascontiguousarray(ds.values).tobytes()).hexdigest())


def median_distance(X, max_rows: int = MEDIAN_SUBSAMPLE) -> float:
    if X.shape[0] > max_rows:
        X = X[np.sort(np.random.default_rng(0).choice(X.shape[0], max_rows, replace=False))]
    d = kernels.pairwise_dist(X)
    h = float(np.median(d)) if d.size else 0.0
    return h if h > 0 else 1.0


def mmd_rbf(A: Dataset, B: Dataset, bandwidth="median") -> float:
    """Unbiased MMD² with kernel ``exp(-|x - y|² / (2 h²))``.

    The arguments are put in a canonical order first, so the result is exactly
    symmetric in (A, B).
    """
    if len(A) < 2 or len(B) < 2:
        raise errors.TooFewRows("MMD needs at least two rows on each side")
    if _key(B) < _key(A):
        A, B = B, A
    X, Y = encode_pair(A, B)
    if bandwidth == "median":
        h = median_distance(np.vstack([X, Y]))
    else:
        h = float(bandwidth)
        if not h > 0:
            raise errors.ConfigError("bandwidth must be positive or 'median'")
    gamma = 1.0 / (2.0 * h * h)
    n, m = X.shape[0], Y.shape[0]
    kxx = (kernels.rbf_sum(X, X, gamma) - n) / (n * (n - 1))
    kyy = (kernels.rbf_sum(Y, Y, gamma) - m) / (m * (m - 1))
    kxy = kernels.rbf_sum(X, Y, gamma) / (n * m)
    return float(kxx + kyy - 2.0 * kxy)


def _hist_pair(a, b, feat, bins: int, pseudo: float):
    if feat.is_continuous:
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        ca, _ = np.histogram(a, edges)
        cb, _ = np.histogram(b, edges)
    else:
        ca = np.bincount(a.astype(np.int64), minlength=feat.n_categories)
        cb = np.bincount(b.astype(np.int64), minlength=feat.n_categories)
    k = ca.size
    p = (ca + pseudo) / (ca.sum() + pseudo * k)
    q = (cb + pseudo) / (cb.sum() + pseudo * k)
    return p, q


def kl(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in nats."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def marginal_divergences(A: Dataset, B: Dataset, bins: int = DEFAULT_BINS, pseudo: float = 1.0):
    """Mean per-feature JSD and mean per-feature 1 / (1 + KL(A || B)) over shared histograms."""
    if bins < 2:
        raise errors.ConfigError("bins must be >= 2")
    if A.schema != B.schema:
        raise errors.SchemaError("datasets must share a schema")
    if len(A) == 0 or len(B) == 0:
        raise errors.TooFewRows("divergences need rows on both sides")
    js, inv = [], []
    for j, feat in enumerate(A.schema.features):
        p, q = _hist_pair(A.values[:, j], B.values[:, j], feat, bins, pseudo)
        js.append(jsd(p, q))
        inv.append(1.0 / (1.0 + kl(p, q)))
    return float(np.mean(js)), float(np.mean(inv))


def corrupt(ds: Dataset, rho: float, seed: int = 0) -> Dataset:
    """Replace a fraction ``rho`` of rows with uniform noise over each column's range."""
    if not 0.0 <= rho <= 1.0:
        raise errors.ConfigError("rho must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = len(ds)
    k = int(round(rho * n))
    X = ds.values.copy()
    rows = np.sort(rng.choice(n, k, replace=False))
    for j, feat in enumerate(ds.schema.features):
        if feat.is_continuous:
            X[rows, j] = rng.uniform(X[:, j].min(), X[:, j].max(), k)
        else:
            X[rows, j] = rng.integers(0, feat.n_categories, k)
    return Dataset(ds.schema, X, weights=ds.weights, index=ds.index)


@dataclass(frozen=True)
class QualityScore:
    mmd: float
    jsd: float
    inv_kld: float
    config: Mapping = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"mmd": self.mmd, "jsd": self.jsd, "inv_kld": self.inv_kld, "config": dict(self.config)}


def holdout_split(data: Dataset, fraction: float = 0.1, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Split off a validation set holding ``fraction`` of the rows."""
    n = len(data)
    k = max(2, int(round(fraction * n)))
    if k >= n - 1:
        raise errors.TooFewRows("not enough rows for a holdout split")
    perm = np.random.default_rng(seed).permutation(n)
    return data.take(np.sort(perm[k:])), data.take(np.sort(perm[:k]))


def select_generator(candidates: Sequence[Mapping], fit_data: Dataset, holdout: Dataset,
                     n_score: int = 2000, seed: int = 0):
    """Fit every candidate config and keep the one whose samples have the lowest MMD to ``holdout``.

    All candidates are sampled with the same seed; ties go to the earlier candidate.
    """
    if not candidates:
        raise errors.ConfigError("need at least one candidate configuration")
    scores = []
    best = None
    sample_seed = derive_seed(seed, 7)
    for cfg in candidates:
        gen = fit_copula(fit_data, lam=float(cfg.get("lambda", 0.05)), seed=int(cfg.get("seed", seed)))
        syn = gen.sample(n_score, sample_seed)
        m = mmd_rbf(syn, holdout)
        j, ik = marginal_divergences(holdout, syn)
        scores.append(QualityScore(m, j, ik, dict(cfg)))
        if best is None or m < best[0]:
            best = (m, dict(cfg))
    return best[1], scores
