"""Performance metrics M(f(x), y) computed from predicted and true label codes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .data import Dataset

ACCURACY = "accuracy"
F1 = "f1"
DI = "di"
EO = "eo"


@dataclass(frozen=True)
class Metric:
    kind: str = ACCURACY
    positive: str = "1"
    sensitive: str | None = None

    def __post_init__(self):
        if self.kind not in (ACCURACY, F1, DI, EO):
            raise errors.ConfigError(f"unknown metric {self.kind!r}")
        if self.kind in (DI, EO) and not self.sensitive:
            raise errors.ConfigError(f"{self.kind} metric needs a sensitive feature")

    @property
    def name(self) -> str:
        return self.kind if self.sensitive is None else f"{self.kind}[{self.sensitive}]"

    @classmethod
    def parse(cls, text: str, positive: str = "1") -> "Metric":
        """Parse ``accuracy``, ``f1``, ``di:sex`` or ``eo:sex``."""
        kind, _, sens = text.partition(":")
        return cls(kind.strip().lower(), positive=positive, sensitive=sens.strip() or None)


def _positive_code(ds: Dataset, metric: Metric) -> int:
    feat = ds.schema.label_feature
    if feat.n_categories != 2:
        raise errors.ConfigError(f"{metric.kind} requires a binary label")
    return feat.code(metric.positive)


def _ratio(rates) -> float:
    rates = np.asarray(rates, dtype=float)
    hi = rates.max()
    return 1.0 if hi == 0 else float(rates.min() / hi)


def group_rates(ds: Dataset, pred, sensitive: str, positive: int, condition=None):
    """Weighted P(pred = positive | A = a[, Y = condition]) for every group present."""
    w = ds.effective_weights()
    groups = ds.codes(sensitive)
    y = ds.labels
    rates = []
    for a in np.unique(groups):
        sel = groups == a
        if condition is not None:
            sel = sel & (y == condition)
        denom = w[sel].sum()
        if denom <= 0:
            name = ds.schema.feature(sensitive).categories[a]
            raise errors.UndefinedRate(f"group {sensitive}={name} has no rows for this rate")
        rates.append(float(w[sel & (pred == positive)].sum() / denom))
    return rates


def metric_value(metric: Metric, ds: Dataset, pred) -> tuple[float, tuple[str, ...]]:
    """Return (value, flags) of ``metric`` for predictions ``pred`` on ``ds``."""
    pred = np.asarray(pred)
    w = ds.effective_weights()
    y = ds.labels
    if metric.kind == ACCURACY:
        total = w.sum()
        if total <= 0:
            raise errors.EmptySubgroup("no weight to evaluate")
        if ds.weights is None:
            return float(np.count_nonzero(pred == y) / len(y)), ()
        return float(w[pred == y].sum() / total), ()
    pos = _positive_code(ds, metric)
    if metric.kind == F1:
        tp = w[(pred == pos) & (y == pos)].sum()
        fp = w[(pred == pos) & (y != pos)].sum()
        fn = w[(pred != pos) & (y == pos)].sum()
        if tp + fp == 0 or 2 * tp + fp + fn == 0:
            return 0.0, ("ill_defined_f1",)
        return float(2 * tp / (2 * tp + fp + fn)), ()
    if metric.kind == DI:
        return _ratio(group_rates(ds, pred, metric.sensitive, pos)), ()
    neg = 1 - pos
    tpr = _ratio(group_rates(ds, pred, metric.sensitive, pos, condition=pos))
    fpr = _ratio(group_rates(ds, pred, metric.sensitive, pos, condition=neg))
    return min(tpr, fpr), ()
