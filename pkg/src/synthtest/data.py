"""Typed tabular data: schema, dataset, CSV/JSON ingestion, splitting and subgroup predicates.

A :class:`Dataset` stores every column in one float64 matrix. Continuous features hold
their values; binary and categorical features hold the integer code of the category
(its position in the declared category list). Datasets are immutable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import errors

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, BINARY, CATEGORICAL)


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise errors.SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        cats = tuple(str(c) for c in self.categories)
        if self.kind == BINARY:
            if cats and cats != ("0", "1"):
                raise errors.SchemaError(f"binary feature {self.name!r} must use categories ('0', '1')")
            cats = ("0", "1")
        elif self.kind == CATEGORICAL:
            if len(cats) < 2:
                raise errors.SchemaError(f"categorical feature {self.name!r} needs >= 2 categories")
            if len(set(cats)) != len(cats):
                raise errors.SchemaError(f"categorical feature {self.name!r} has duplicate categories")
        elif cats:
            raise errors.SchemaError(f"continuous feature {self.name!r} cannot declare categories")
        object.__setattr__(self, "categories", cats)

    @property
    def is_continuous(self) -> bool:
        return self.kind == CONTINUOUS

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def code(self, value) -> int:
        try:
            return self.categories.index(str(value))
        except ValueError:
            raise errors.UnknownCategory(self.name, value, -1) from None

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            out["categories"] = list(self.categories)
        return out


class Schema:
    """Ordered feature list plus the name of the label feature."""

    def __init__(self, features: Sequence[Feature], label: str):
        self.features = tuple(features)
        self.names = tuple(f.name for f in self.features)
        if len(set(self.names)) != len(self.names):
            raise errors.SchemaError("feature names must be unique")
        if label not in self.names:
            raise errors.SchemaError(f"label {label!r} is not a feature")
        self.label = label
        self._pos = {n: i for i, n in enumerate(self.names)}
        if self.feature(label).is_continuous:
            raise errors.SchemaError("label must be binary or categorical")

    def __len__(self):
        return len(self.features)

    def __eq__(self, other):
        return isinstance(other, Schema) and self.features == other.features and self.label == other.label

    def __hash__(self):
        return hash((self.features, self.label))

    def __repr__(self):
        return f"Schema({list(self.names)}, label={self.label!r})"

    def index(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise errors.UnknownFeature(f"unknown feature {name!r}") from None

    def feature(self, name: str) -> Feature:
        return self.features[self.index(name)]

    @property
    def label_index(self) -> int:
        return self._pos[self.label]

    @property
    def label_feature(self) -> Feature:
        return self.features[self.label_index]

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if n != self.label)

    def to_dict(self) -> dict:
        return {"features": [f.to_dict() for f in self.features], "label": self.label}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Schema":
        try:
            feats = [Feature(f["name"], f["kind"], tuple(f.get("categories", ()))) for f in d["features"]]
            return cls(feats, d["label"])
        except (KeyError, TypeError) as exc:
            raise errors.SchemaError(f"malformed schema document: {exc}") from None

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_schema(path) -> Schema:
    try:
        with open(path, encoding="utf-8") as fh:
            return Schema.from_dict(json.load(fh))
    except FileNotFoundError:
        raise errors.ConfigError(f"schema file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise errors.SchemaError(f"schema file is not valid JSON: {exc}") from None


def save_schema(schema: Schema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


class Dataset:
    """Immutable table conforming to a schema.

    Parameters
    ----------
    schema : Schema
    values : array_like, shape (n, d)
        Column ``j`` holds feature ``schema.features[j]``; categorical columns hold codes.
    weights : array_like, optional
        Non-negative per-row weights.
    index : array_like of int, optional
        Row identifiers (defaults to ``0..n-1``); preserved by filtering and ``take``.
    """

    def __init__(self, schema: Schema, values, weights=None, index=None):
        values = np.array(values, dtype=np.float64, copy=True)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(schema))
        if values.ndim != 2 or values.shape[1] != len(schema):
            raise errors.DataError(f"values must have shape (n, {len(schema)}), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise errors.MissingValue("dataset contains missing or non-finite values")
        for j, feat in enumerate(schema.features):
            if not feat.is_continuous:
                col = values[:, j]
                bad = (col != np.round(col)) | (col < 0) | (col >= feat.n_categories)
                if np.any(bad):
                    r = int(np.argmax(bad))
                    raise errors.UnknownCategory(feat.name, col[r], r)
        if weights is not None:
            weights = np.array(weights, dtype=np.float64, copy=True)
            if weights.shape != (values.shape[0],):
                raise errors.DataError("weights must have one entry per row")
            if not np.all(np.isfinite(weights)) or np.any(weights < 0):
                raise errors.DataError("weights must be finite and non-negative")
            weights.setflags(write=False)
        if index is None:
            index = np.arange(values.shape[0], dtype=np.int64)
        else:
            index = np.array(index, dtype=np.int64, copy=True)
            if index.shape != (values.shape[0],):
                raise errors.DataError("index must have one entry per row")
        values.setflags(write=False)
        index.setflags(write=False)
        self.schema = schema
        self.values = values
        self.weights = weights
        self.index = index

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"Dataset(n={len(self)}, features={list(self.schema.names)})"

    @property
    def n_rows(self) -> int:
        return len(self)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]

    def codes(self, name: str) -> np.ndarray:
        return self.column(name).astype(np.int64)

    @property
    def labels(self) -> np.ndarray:
        return self.values[:, self.schema.label_index].astype(np.int64)

    def effective_weights(self) -> np.ndarray:
        return np.ones(len(self)) if self.weights is None else self.weights

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        w = None if self.weights is None else self.weights[idx]
        return Dataset(self.schema, self.values[idx], weights=w, index=self.index[idx])

    def with_column(self, name: str, column) -> "Dataset":
        vals = self.values.copy()
        vals[:, self.schema.index(name)] = column
        return Dataset(self.schema, vals, weights=self.weights, index=self.index)

    def row(self, i: int) -> dict:
        out = {}
        for j, feat in enumerate(self.schema.features):
            v = self.values[i, j]
            out[feat.name] = float(v) if feat.is_continuous else feat.categories[int(v)]
        return out

    def rows(self) -> Iterable[dict]:
        for i in range(len(self)):
            yield self.row(i)

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema or self.values.shape != other.values.shape:
            return False
        if not np.array_equal(self.values, other.values):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    @classmethod
    def from_rows(cls, schema: Schema, rows: Sequence, weights=None) -> "Dataset":
        """Build from dict rows (keyed by name) or sequences in schema order."""
        vals = np.empty((len(rows), len(schema)))
        for i, row in enumerate(rows):
            if isinstance(row, Mapping):
                row = [row[n] for n in schema.names]
            for j, feat in enumerate(schema.features):
                vals[i, j] = float(row[j]) if feat.is_continuous else encode_value(feat, row[j], i)
        return cls(schema, vals, weights=weights)

    @staticmethod
    def concat(parts: Sequence["Dataset"]) -> "Dataset":
        schema = parts[0].schema
        if any(p.schema != schema for p in parts):
            raise errors.DataError("cannot concatenate datasets with different schemas")
        vals = np.vstack([p.values for p in parts])
        idx = np.concatenate([p.index for p in parts])
        if all(p.weights is None for p in parts):
            w = None
        else:
            w = np.concatenate([p.effective_weights() for p in parts])
        return Dataset(schema, vals, weights=w, index=idx)


def encode_value(feat: Feature, value, row: int = -1) -> int:
    try:
        return feat.categories.index(str(value))
    except ValueError:
        raise errors.UnknownCategory(feat.name, value, row) from None


# -- CSV ingestion --------------------------------------------------------------------


def load_csv(path, schema: Schema) -> Dataset:
    """Read a UTF-8 CSV with a header row; columns may appear in any order."""
    path = Path(path)
    if not path.exists():
        raise errors.ConfigError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise errors.EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise errors.MissingColumn(f"{path}: missing columns {missing}")
        pos = [header.index(n) for n in schema.names]
        rows = []
        for r, rec in enumerate(reader):
            if not rec or all(not c.strip() for c in rec):
                continue
            out = []
            for feat, p in zip(schema.features, pos):
                raw = rec[p].strip() if p < len(rec) else ""
                if raw == "":
                    raise errors.MissingValue(f"row {r}: missing value for {feat.name!r}")
                if feat.is_continuous:
                    try:
                        x = float(raw)
                    except ValueError:
                        raise errors.UnparseableNumber(feat.name, raw, r) from None
                    if not math.isfinite(x):
                        raise errors.UnparseableNumber(feat.name, raw, r)
                    out.append(x)
                else:
                    out.append(encode_value(feat, raw, r))
            rows.append(out)
    if not rows:
        raise errors.EmptyFile(f"{path} has a header but no rows")
    return Dataset(schema, np.array(rows, dtype=np.float64))


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ds.schema.names)
        feats = ds.schema.features
        for i in range(len(ds)):
            w.writerow([repr(float(v)) if f.is_continuous else f.categories[int(v)]
                        for f, v in zip(feats, ds.values[i])])


# -- splitting and quantiles -------------------------------------------------------------


def split(ds: Dataset, fractions, seed: int):
    """Partition rows into disjoint (train, test, oracle) parts of size round(fraction * n)."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(not f > 0 for f in fractions) or sum(fractions) > 1.0 + 1e-9:
        raise errors.BadFractions(f"fractions must be three positive reals summing to <= 1, got {fractions}")
    n = len(ds)
    sizes = [int(round(f * n)) for f in fractions]
    while sum(sizes) > n:
        sizes[int(np.argmax(sizes))] -= 1
    perm = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum([0] + sizes)
    return tuple(ds.take(np.sort(perm[bounds[k]:bounds[k + 1]])) for k in range(3))


def empirical_quantile(ds: Dataset, feature: str, q: float) -> float:
    feat = ds.schema.feature(feature)
    if not feat.is_continuous:
        raise errors.NotContinuous(f"{feature!r} is not continuous")
    if len(ds) == 0:
        raise errors.EmptyDataset("quantile of an empty dataset")
    return float(np.quantile(ds.column(feature), q, method="linear"))


# -- subgroup predicates ----------------------------------------------------------------


@dataclass(frozen=True)
class CategoryEquals:
    feature: str
    value: str

    def mask(self, ds: Dataset) -> np.ndarray:
        feat = ds.schema.feature(self.feature)
        if feat.is_continuous:
            raise errors.KindMismatch(f"CategoryEquals on continuous feature {self.feature!r}")
        return ds.codes(self.feature) == encode_value(feat, self.value)

    def contains(self, row: Mapping) -> bool:
        return str(row[self.feature]) == str(self.value)

    def describe(self) -> str:
        return f"{self.feature}={self.value}"


@dataclass(frozen=True)
class Interval:
    feature: str
    low: float = -math.inf
    high: float = math.inf
    closed_low: bool = True
    closed_high: bool = False

    def _test(self, x):
        lo = x >= self.low if self.closed_low else x > self.low
        hi = x <= self.high if self.closed_high else x < self.high
        return lo & hi

    def mask(self, ds: Dataset) -> np.ndarray:
        if not ds.schema.feature(self.feature).is_continuous:
            raise errors.NotContinuous(f"Interval on non-continuous feature {self.feature!r}")
        return self._test(ds.column(self.feature))

    def contains(self, row: Mapping) -> bool:
        return bool(self._test(float(row[self.feature])))

    def describe(self) -> str:
        lb = "[" if self.closed_low else "("
        rb = "]" if self.closed_high else ")"
        return f"{self.feature} in {lb}{self.low:g}, {self.high:g}{rb}"


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Ball of radius ``radius`` around ``center`` under :func:`mixed_distance`."""

    center: Mapping
    radius: float
    scales: Mapping = field(default_factory=dict)

    def mask(self, ds: Dataset) -> np.ndarray:
        return mixed_distance(ds, self.center, self.scales) <= self.radius

    def contains(self, row: Mapping) -> bool:
        return row_distance(row, self.center, self.scales) <= self.radius

    def describe(self) -> str:
        return f"within {self.radius:g} of point"


def feature_scales(ds: Dataset) -> dict:
    """Standard deviation of each continuous non-label feature (1.0 when degenerate)."""
    out = {}
    for name in ds.schema.predictor_names:
        if ds.schema.feature(name).is_continuous:
            sd = float(np.std(ds.column(name))) if len(ds) > 1 else 0.0
            out[name] = sd if sd > 0 else 1.0
    return out


def mixed_distance(ds: Dataset, center: Mapping, scales: Mapping) -> np.ndarray:
    """Standardized Euclidean on continuous features plus 0/1 mismatch on categoricals.

    Only features present in ``center`` (excluding the label) contribute.
    """
    sq = np.zeros(len(ds))
    for name, value in center.items():
        if name == ds.schema.label:
            continue
        feat = ds.schema.feature(name)
        if feat.is_continuous:
            sq += ((ds.column(name) - float(value)) / scales.get(name, 1.0)) ** 2
        else:
            sq += ds.codes(name) != encode_value(feat, value)
    return np.sqrt(sq)


def row_distance(a: Mapping, b: Mapping, scales: Mapping) -> float:
    sq = 0.0
    for name in b:
        if name not in a:
            continue
        va, vb = a[name], b[name]
        if name in scales or isinstance(vb, (int, float)) and not isinstance(vb, bool):
            sq += ((float(va) - float(vb)) / scales.get(name, 1.0)) ** 2
        else:
            sq += float(str(va) != str(vb))
    return math.sqrt(sq)


@dataclass(frozen=True, eq=False)
class SubgroupSpec:
    """Conjunction of atoms; the empty conjunction is the whole space."""

    atoms: tuple = ()
    name: str | None = None

    def __and__(self, other: "SubgroupSpec") -> "SubgroupSpec":
        return SubgroupSpec(self.atoms + other.atoms)

    @property
    def features(self) -> tuple[str, ...]:
        out = []
        for a in self.atoms:
            out.extend(a.center.keys() if isinstance(a, Neighborhood) else [a.feature])
        return tuple(out)

    def mask(self, ds: Dataset) -> np.ndarray:
        for f in self.features:
            ds.schema.index(f)
        m = np.ones(len(ds), dtype=bool)
        for a in self.atoms:
            m &= a.mask(ds)
        return m

    def contains(self, row: Mapping) -> bool:
        return all(a.contains(row) for a in self.atoms)

    def describe(self) -> str:
        if self.name:
            return self.name
        return " & ".join(a.describe() for a in self.atoms) if self.atoms else "all"


def category(feature: str, value: str) -> SubgroupSpec:
    return SubgroupSpec((CategoryEquals(feature, str(value)),))


def subgroup_filter(ds: Dataset, spec: SubgroupSpec) -> Dataset:
    return ds.take(np.flatnonzero(spec.mask(ds)))


def category_subgroups(schema: Schema, feature: str) -> list[SubgroupSpec]:
    feat = schema.feature(feature)
    if feat.is_continuous:
        raise errors.KindMismatch(f"{feature!r} is continuous; bin it first")
    return [category(feature, c) for c in feat.categories]


def quartile_subgroups(ds: Dataset, feature: str) -> list[SubgroupSpec]:
    """Four interval subgroups split at the empirical quartiles of a continuous feature."""
    q = [empirical_quantile(ds, feature, p) for p in (0.25, 0.5, 0.75)]
    edges = [-math.inf, *q, math.inf]
    return [SubgroupSpec((Interval(feature, edges[k], edges[k + 1]),), name=f"{feature}:Q{k + 1}")
            for k in range(4)]
