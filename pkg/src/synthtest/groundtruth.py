"""Synthetic ground-truth population with known p(X, Y).

Rows are drawn as follows. A group feature and a crossed categorical feature
come from independent categorical draws, and a binary ``sex`` feature is
Bernoulli. The continuous features are group-specific affine maps of a correlated
standard-normal vector. The clean label is Bernoulli(sigmoid(logit)), or the sign
of the logit in deterministic mode; the logit is linear in the standardized
continuous features plus group, cross-feature and sex effects. Each group then
flips labels at its own noise rate.

Because the continuous latents are independent of the categorical features, the
logit is Gaussian given (group, cross level, sex). Bayes accuracies therefore
reduce to one-dimensional Gauss-Hermite integrals.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import special

from . import errors
from .data import Dataset, Feature, Schema


@dataclass(frozen=True)
class GroundTruthSpec:
    group_feature: str = "group"
    group_levels: tuple = ("A", "B", "C", "D")
    group_probs: tuple = (0.86, 0.09, 0.03, 0.02)
    cross_feature: str = "region"
    cross_levels: tuple = ("north", "south", "east", "west")
    cross_probs: tuple = (0.4, 0.3, 0.2, 0.1)
    sex_feature: str = "sex"
    sex_prob: float = 0.5
    continuous: tuple = ("age", "income", "hours")
    # rows: groups, columns: continuous features
    means: tuple = ((42.0, 55.0, 40.0), (50.0, 46.0, 37.0), (57.0, 40.0, 34.0), (63.0, 36.0, 32.0))
    sds: tuple = ((11.0, 15.0, 8.0), (10.0, 13.0, 8.0), (9.0, 12.0, 9.0), (8.0, 11.0, 9.0))
    correlation: tuple = ((1.0, 0.3, 0.2), (0.3, 1.0, 0.4), (0.2, 0.4, 1.0))
    centers: tuple = (45.0, 50.0, 38.0)
    scales: tuple = (12.0, 15.0, 8.0)
    intercept: float = -0.2
    weights: tuple = (1.3, 0.9, 0.6)
    group_effects: tuple = (0.0, -0.3, -0.6, -0.9)
    cross_effects: tuple = (0.0, 0.4, -0.4, 0.8)
    sex_effect: float = 0.5
    noise: tuple = (0.03, 0.03, 0.03, 0.03)
    deterministic_label: bool = False
    label: str = "outcome"

    def __post_init__(self):
        g = len(self.group_levels)
        k = len(self.continuous)
        checks = [
            (abs(sum(self.group_probs) - 1.0) < 1e-9 and min(self.group_probs) > 0, "group_probs must be positive and sum to 1"),
            (abs(sum(self.cross_probs) - 1.0) < 1e-9 and min(self.cross_probs) > 0, "cross_probs must be positive and sum to 1"),
            (len(self.group_probs) == g and len(self.group_effects) == g and len(self.noise) == g, "per-group lists must match group_levels"),
            (len(self.cross_probs) == len(self.cross_levels) == len(self.cross_effects), "per-level lists must match cross_levels"),
            (np.shape(self.means) == (g, k) and np.shape(self.sds) == (g, k), "means/sds must be groups x continuous"),
            (np.shape(self.correlation) == (k, k), "correlation must be continuous x continuous"),
            (len(self.centers) == len(self.scales) == len(self.weights) == k, "centers/scales/weights must match continuous"),
            (all(0.0 <= e < 0.5 for e in self.noise), "noise rates must lie in [0, 0.5)"),
            (0.0 < self.sex_prob < 1.0, "sex_prob must lie in (0, 1)"),
            (np.all(np.asarray(self.sds) > 0) and np.all(np.asarray(self.scales) > 0), "sds and scales must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise errors.BadSpec(msg)
        R = np.asarray(self.correlation, dtype=float)
        if not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1.0) or np.linalg.eigvalsh(R)[0] <= 0:
            raise errors.BadSpec("correlation must be a symmetric positive-definite correlation matrix")

    @property
    def schema(self) -> Schema:
        feats = [Feature(self.group_feature, "categorical", self.group_levels),
                 Feature(self.cross_feature, "categorical", self.cross_levels),
                 Feature(self.sex_feature, "binary")]
        feats += [Feature(c, "continuous") for c in self.continuous]
        feats.append(Feature(self.label, "binary"))
        return Schema(feats, self.label)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruthSpec":
        def tup(v):
            return tuple(tup(x) for x in v) if isinstance(v, list) else v
        try:
            return cls(**{k: tup(v) for k, v in d.items()})
        except TypeError as exc:
            raise errors.BadSpec(f"malformed ground-truth spec: {exc}") from None

    @classmethod
    def load(cls, path) -> "GroundTruthSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise errors.ConfigError(f"ground-truth spec not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise errors.BadSpec(f"ground-truth spec is not valid JSON: {exc}") from None

    # -- pieces of the label model ------------------------------------------------------

    def logit_parts(self, group: int):
        """Mean shift and coefficients of the logit in the latent normals, for one group."""
        mu = np.asarray(self.means[group])
        sd = np.asarray(self.sds[group])
        c = np.asarray(self.centers)
        s = np.asarray(self.scales)
        w = np.asarray(self.weights)
        shift = self.intercept + self.group_effects[group] + float(np.sum(w * (mu - c) / s))
        coef = w * sd / s
        return shift, coef


def simulate_ground_truth(spec: GroundTruthSpec, n: int, seed: int) -> Dataset:
    if n < 1:
        raise errors.ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.choice(len(spec.group_levels), size=n, p=spec.group_probs)
    h = rng.choice(len(spec.cross_levels), size=n, p=spec.cross_probs)
    sex = (rng.random(n) < spec.sex_prob).astype(np.int64)
    L = np.linalg.cholesky(np.asarray(spec.correlation, dtype=float))
    z = rng.standard_normal((n, len(spec.continuous))) @ L.T
    means = np.asarray(spec.means)[g]
    sds = np.asarray(spec.sds)[g]
    x = means + sds * z
    w = np.asarray(spec.weights)
    logit = (spec.intercept + np.asarray(spec.group_effects)[g] + np.asarray(spec.cross_effects)[h]
             + spec.sex_effect * sex + ((x - np.asarray(spec.centers)) / np.asarray(spec.scales)) @ w)
    u = rng.random(n)
    if spec.deterministic_label:
        y = (logit > 0).astype(np.int64)
    else:
        y = (u < special.expit(logit)).astype(np.int64)
    flip = rng.random(n) < np.asarray(spec.noise)[g]
    y = np.where(flip, 1 - y, y)
    vals = np.column_stack([g, h, sex, x, y]).astype(np.float64)
    return Dataset(spec.schema, vals)


def bayes_predictor(spec: GroundTruthSpec):
    """Predictor that thresholds the true logit (Bayes-optimal for noise rates below 0.5)."""
    return _BayesPredictor(spec)


class _BayesPredictor:
    def __init__(self, spec: GroundTruthSpec):
        self.spec = spec
        self.schema = spec.schema

    def _logit(self, ds: Dataset) -> np.ndarray:
        s = self.spec
        g = ds.codes(s.group_feature)
        h = ds.codes(s.cross_feature)
        sex = ds.codes(s.sex_feature)
        x = np.column_stack([ds.column(c) for c in s.continuous])
        return (s.intercept + np.asarray(s.group_effects)[g] + np.asarray(s.cross_effects)[h]
                + s.sex_effect * sex + ((x - np.asarray(s.centers)) / np.asarray(s.scales)) @ np.asarray(s.weights))

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        p = special.expit(self._logit(ds))
        return np.column_stack([1 - p, p])

    def predict(self, ds: Dataset) -> np.ndarray:
        return (self._logit(ds) > 0).astype(np.int64)

    def confidence(self, ds: Dataset) -> np.ndarray:
        return np.max(self.predict_proba(ds), axis=1)


def bayes_accuracy(spec: GroundTruthSpec, group: int | None = None, cross: int | None = None,
                   nodes: int = 80) -> float:
    """Accuracy of the Bayes predictor, optionally within one group and/or cross level.

    Given (group, cross level, sex) the logit is normal, so the expectation of
    ``eta + (1 - 2 eta) * max(p, 1 - p)`` is a Gauss-Hermite integral.
    """
    t, wq = np.polynomial.hermite_e.hermegauss(nodes)
    wq = wq / wq.sum()
    R = np.asarray(spec.correlation, dtype=float)
    groups = range(len(spec.group_levels)) if group is None else [group]
    crosses = range(len(spec.cross_levels)) if cross is None else [cross]
    total = 0.0
    mass = 0.0
    for gi in groups:
        shift, coef = spec.logit_parts(gi)
        sd = float(np.sqrt(coef @ R @ coef))
        eta = spec.noise[gi]
        for hi in crosses:
            for sx, ps in ((0, 1 - spec.sex_prob), (1, spec.sex_prob)):
                p_cell = spec.group_probs[gi] * spec.cross_probs[hi] * ps
                m = shift + spec.cross_effects[hi] + spec.sex_effect * sx
                lg = m + sd * t
                if spec.deterministic_label:
                    clean = np.ones_like(lg)
                else:
                    clean = special.expit(np.abs(lg))
                total += p_cell * float(wq @ (eta + (1 - 2 * eta) * clean))
                mass += p_cell
    return total / mass
