"""Comparison estimators: bootstrap intervals, ATC, DOC, importance weighting, MS and RS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .data import Dataset, SubgroupSpec
from .metrics import ACCURACY, Metric, metric_value
from .shifts import rejection_sample

UNLABELED_TARGET = "unlabeled target"
NO_TARGET = "no target data"


@dataclass(frozen=True)
class BaselineResult:
    name: str
    estimate: float
    inputs_used: str
    low: float | None = None
    high: float | None = None
    flags: tuple = ()

    def to_dict(self) -> dict:
        out = {"name": self.name, "estimate": self.estimate, "inputs_used": self.inputs_used}
        if self.low is not None:
            out.update(low=self.low, high=self.high)
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def _metric(metric):
    return metric if isinstance(metric, Metric) else Metric(ACCURACY) if metric is None else Metric.parse(metric)


def bootstrap_interval(f, D: Dataset, spec: SubgroupSpec | None, metric=None, B: int = 200,
                       seed: int = 0) -> BaselineResult:
    """Resample the full test set B times and report mean ± 2 sd of the subgroup estimate.

    Resamples in which the subgroup happens to be empty are skipped.
    """
    if B < 2:
        raise errors.ConfigError("B must be >= 2")
    metric = _metric(metric)
    spec = spec or SubgroupSpec()
    mask = spec.mask(D)
    if not mask.any():
        raise errors.EmptySubgroup(f"no rows of the test set fall in {spec.describe()!r}")
    pred = f.predict(D)
    rng = np.random.default_rng(seed)
    n = len(D)
    vals = []
    for _ in range(B):
        idx = rng.integers(0, n, n)
        idx = idx[mask[idx]]
        if idx.size == 0:
            continue
        vals.append(metric_value(metric, D.take(idx), pred[idx])[0])
    v = np.asarray(vals)
    mu = float(v.mean())
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return BaselineResult("bootstrap", mu, NO_TARGET, max(0.0, mu - 2 * sd), min(1.0, mu + 2 * sd))


def _source_accuracy(f, source: Dataset) -> float:
    if len(source) == 0:
        raise errors.EmptyDataset("source set is empty")
    return metric_value(Metric(ACCURACY), source, f.predict(source))[0]


def atc_threshold(conf_source, acc: float) -> float:
    """Threshold t with fraction{conf > t} = acc: the (1 - acc) quantile of source confidences."""
    return float(np.quantile(np.asarray(conf_source, dtype=np.float64), 1.0 - acc, method="linear"))


def atc_predict(f, source_labeled: Dataset, target_unlabeled: Dataset) -> BaselineResult:
    if len(target_unlabeled) == 0:
        raise errors.EmptyDataset("target set is empty")
    acc = _source_accuracy(f, source_labeled)
    t = atc_threshold(f.confidence(source_labeled), acc)
    est = float(np.mean(f.confidence(target_unlabeled) > t))
    return BaselineResult("ATC", est, UNLABELED_TARGET)


def doc_predict(f, source_labeled: Dataset, target_unlabeled: Dataset) -> BaselineResult:
    if len(target_unlabeled) == 0:
        raise errors.EmptyDataset("target set is empty")
    acc = _source_accuracy(f, source_labeled)
    raw = acc + (float(np.mean(f.confidence(target_unlabeled))) - float(np.mean(f.confidence(source_labeled))))
    est = min(1.0, max(0.0, raw))
    flags = ("clipped",) if est != raw else ()
    return BaselineResult("DOC", est, UNLABELED_TARGET, flags=flags)


def _bin_codes(ds: Dataset, features, edges) -> np.ndarray:
    """Joint bin id of every row: categorical codes as is, continuous columns on shared edges."""
    key = np.zeros(len(ds), dtype=np.int64)
    for f in features:
        feat = ds.schema.feature(f)
        x = ds.column(f)
        if feat.is_continuous:
            e = edges[f]
            b = np.clip(np.searchsorted(e, x, side="right") - 1, 0, len(e) - 2)
            k = len(e) - 1
        else:
            b = x.astype(np.int64)
            k = feat.n_categories
        key = key * k + b
    return key


def im_weights(source: Dataset, target: Dataset, features, bins: int = 10) -> np.ndarray:
    """Density ratio p_target / p_source per source row from Laplace-smoothed shared-bin histograms."""
    features = list(features)
    edges = {}
    n_cells = 1
    for f in features:
        feat = source.schema.feature(f)
        if feat.is_continuous:
            lo = min(source.column(f).min(), target.column(f).min())
            hi = max(source.column(f).max(), target.column(f).max())
            edges[f] = np.linspace(lo, hi if hi > lo else lo + 1.0, bins + 1)
            n_cells *= bins
        else:
            n_cells *= feat.n_categories
    ks = _bin_codes(source, features, edges)
    kt = _bin_codes(target, features, edges)
    cs = np.bincount(ks, minlength=n_cells).astype(float)
    ct = np.bincount(kt, minlength=n_cells).astype(float)
    ps = (cs + 1.0) / (cs.sum() + n_cells)
    pt = (ct + 1.0) / (ct.sum() + n_cells)
    return (pt / ps)[ks]


def weighted_accuracy(correct, w) -> float:
    w = np.asarray(w, dtype=np.float64)
    return float(np.sum(w * correct) / np.sum(w))


def im_predict(f, source_labeled: Dataset, target_features: Dataset, features=None, bins: int = 10) -> BaselineResult:
    """Importance-weighted source accuracy; ``target_features`` only needs the shared features filled."""
    if features is None:
        features = source_labeled.schema.predictor_names
    w = im_weights(source_labeled, target_features, features, bins)
    correct = (f.predict(source_labeled) == source_labeled.labels).astype(float)
    return BaselineResult("IM", weighted_accuracy(correct, w), UNLABELED_TARGET)


def ms_baseline(test: Dataset, f, feature: str, s: float, metric=None) -> BaselineResult:
    """Add ``s`` to one column of the real test set and evaluate; the rest of each row is untouched."""
    if not test.schema.feature(feature).is_continuous:
        raise errors.NotContinuous(f"{feature!r} is not continuous")
    metric = _metric(metric)
    shifted = test.with_column(feature, test.column(feature) + s)
    return BaselineResult("MS", metric_value(metric, shifted, f.predict(shifted))[0], NO_TARGET)


def rs_baseline(test: Dataset, f, shift, n_s: int, metric=None, seed: int = 0, bandwidth="auto") -> BaselineResult:
    metric = _metric(metric)
    ds = rejection_sample(test, shift, n_s, bandwidth, seed)
    return BaselineResult("RS", metric_value(metric, ds, f.predict(ds))[0], NO_TARGET)


def source_all(f, source: Dataset, metric=None) -> BaselineResult:
    """Plain source-domain estimate, ignoring the shift."""
    metric = _metric(metric)
    return BaselineResult("Source-All", metric_value(metric, source, f.predict(source))[0], NO_TARGET)
