"""Performance estimates on real, synthetic and augmented data, plus derived reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import errors
from .data import (Dataset, Neighborhood, SubgroupSpec, category_subgroups, feature_scales,
                   mixed_distance, quartile_subgroups, subgroup_filter)
from .generator import CopulaGenerator, GeneratorEnsemble, ensemble_stats, member_seed
from .metrics import ACCURACY, DI, EO, Metric, metric_value

REAL = "real"
SYNTHETIC = "synthetic"
SYNTHETIC_PLUS = "synthetic+"
ORACLE = "oracle"

DEFAULT_MIN_N = 100
DEFAULT_NEIGHBORS = 10


@dataclass(frozen=True)
class PerfEstimate:
    value: float
    source: str
    n_eval: int
    subgroup: str = "all"
    low: float | None = None
    high: float | None = None
    std: float | None = None
    flags: tuple = ()

    def to_dict(self) -> dict:
        out = {"value": self.value, "source": self.source, "n_eval": self.n_eval, "subgroup": self.subgroup}
        if self.low is not None:
            out.update(low=self.low, high=self.high, std=self.std)
        if self.flags:
            out["flags"] = list(self.flags)
        return out


@dataclass(frozen=True)
class PredictionInterval:
    l: float
    r: float

    def __post_init__(self):
        if not self.l <= self.r:
            raise errors.ConfigError(f"interval bounds out of order: [{self.l}, {self.r}]")

    def contains(self, x: float) -> bool:
        return self.l <= x <= self.r


@dataclass(frozen=True)
class Augmented:
    """Real rows pooled with generated rows (real plus synthetic evaluation)."""

    data: Dataset
    generator: object


def _metric(metric) -> Metric:
    if metric is None:
        return Metric(ACCURACY)
    return metric if isinstance(metric, Metric) else Metric.parse(str(metric))


def estimate(f, D: Dataset, spec: SubgroupSpec | None = None, metric=None, source: str = REAL) -> PerfEstimate:
    """Metric of ``f`` on the rows of ``D`` inside ``spec``."""
    metric = _metric(metric)
    spec = spec or SubgroupSpec()
    sub = subgroup_filter(D, spec)
    if len(sub) == 0:
        raise errors.EmptySubgroup(f"no rows of the evaluation set fall in {spec.describe()!r}")
    value, flags = metric_value(metric, sub, f.predict(sub))
    return PerfEstimate(value, source, len(sub), spec.describe(), flags=flags)


def largest_subgroup(reference: Dataset, subgroups: Sequence[SubgroupSpec]) -> int:
    return max(int(np.count_nonzero(s.mask(reference))) for s in subgroups)


def _generated_estimate(gen, f, spec, metric, n, seed, real: Dataset | None, source: str) -> PerfEstimate:
    members = gen.members if isinstance(gen, GeneratorEnsemble) else (gen,)
    real_part = subgroup_filter(real, spec) if real is not None else None
    vals, flags, sizes = [], set(), []
    for k, g in enumerate(members):
        ds = g.sample_subgroup(spec, n, member_seed(seed, k))
        if real_part is not None and len(real_part):
            ds = Dataset.concat([real_part, Dataset(ds.schema, ds.values)])
        v, fl = metric_value(metric, ds, f.predict(ds))
        vals.append(v)
        flags.update(fl)
        sizes.append(len(ds))
    if isinstance(gen, GeneratorEnsemble):
        st = ensemble_stats(vals)
        if st.degenerate:
            flags.add("degenerate_interval")
        return PerfEstimate(st.mean, source, sizes[0], spec.describe(), st.low, st.high, st.std, tuple(sorted(flags)))
    return PerfEstimate(vals[0], source, sizes[0], spec.describe(), flags=tuple(sorted(flags)))


def balanced_subgroup_report(source, f, subgroups: Sequence[SubgroupSpec], metric=None, seed: int = 0,
                             reference: Dataset | None = None, n: int | None = None) -> list[PerfEstimate]:
    """Estimate every subgroup from a dataset, a generator, an ensemble or an :class:`Augmented` pair.

    Generated sources draw the same number of rows for every subgroup: the size of
    the largest subgroup in ``reference`` (the real test set) unless ``n`` is given.
    """
    metric = _metric(metric)
    if isinstance(source, Dataset):
        return [estimate(f, source, s, metric, REAL) for s in subgroups]
    real = None
    tag = SYNTHETIC
    gen = source
    if isinstance(source, Augmented):
        real, gen, tag = source.data, source.generator, SYNTHETIC_PLUS
        reference = reference if reference is not None else real
    if n is None:
        if reference is None:
            raise errors.ConfigError("generated sources need a reference dataset or an explicit n")
        n = largest_subgroup(reference, subgroups)
    if n < 1:
        raise errors.EmptySubgroup("the reference set has no rows in any subgroup")
    return [_generated_estimate(gen, f, s, metric, n, seed, real, tag) for s in subgroups]


# -- intersectional matrices --------------------------------------------------------------


@dataclass
class IntersectionalMatrix:
    feature_a: str
    feature_b: str
    labels_a: list
    labels_b: list
    cells: list          # rows of PerfEstimate or None
    counts: list         # evaluation-set row count of every cell
    min_n: int = DEFAULT_MIN_N

    def values(self) -> np.ndarray:
        return np.array([[np.nan if c is None else c.value for c in row] for row in self.cells])

    def to_dict(self) -> dict:
        return {"feature_a": self.feature_a, "feature_b": self.feature_b,
                "labels_a": self.labels_a, "labels_b": self.labels_b,
                "values": [[None if c is None else c.value for c in row] for row in self.cells],
                "counts": self.counts, "min_n": self.min_n}

    @classmethod
    def from_dict(cls, d: Mapping) -> "IntersectionalMatrix":
        cells = [[None if v is None else PerfEstimate(v, "stored", n) for v, n in zip(vr, nr)]
                 for vr, nr in zip(d["values"], d["counts"])]
        return cls(d["feature_a"], d["feature_b"], list(d["labels_a"]), list(d["labels_b"]),
                   cells, [list(r) for r in d["counts"]], d.get("min_n", DEFAULT_MIN_N))

    def csv_rows(self, na: str = "NA({n})") -> list[list[str]]:
        out = [[f"{self.feature_a}\\{self.feature_b}", *self.labels_b]]
        for la, row, cnt in zip(self.labels_a, self.cells, self.counts):
            out.append([la, *[na.format(n=c, min_n=self.min_n) if e is None else repr(e.value)
                              for e, c in zip(row, cnt)]])
        return out


def axis_subgroups(reference: Dataset, feature: str) -> list[SubgroupSpec]:
    feat = reference.schema.feature(feature)
    if feat.is_continuous:
        return quartile_subgroups(reference, feature)
    return category_subgroups(reference.schema, feature)


def _axis_label(spec: SubgroupSpec) -> str:
    if spec.name:
        return spec.name.split(":", 1)[-1]
    return spec.atoms[0].value


def intersectional_matrix(f, eval_source, feature_a: str, feature_b: str, metric=None,
                          min_n: int = DEFAULT_MIN_N, seed: int = 0, reference: Dataset | None = None,
                          n: int | None = None) -> IntersectionalMatrix:
    """Estimates on every (a, b) cell; a cell is null when its evaluation set has fewer than ``min_n`` rows."""
    metric = _metric(metric)
    if isinstance(eval_source, Dataset):
        reference = reference if reference is not None else eval_source
    elif isinstance(eval_source, Augmented) and reference is None:
        reference = eval_source.data
    if reference is None:
        raise errors.ConfigError("generated sources need a reference dataset for axis bins and cell sizes")
    axes_a = axis_subgroups(reference, feature_a)
    axes_b = axis_subgroups(reference, feature_b)
    grid = [[a & b for b in axes_b] for a in axes_a]
    if not isinstance(eval_source, Dataset) and n is None:
        n = largest_subgroup(reference, [c for row in grid for c in row])
    cells, counts = [], []
    for row in grid:
        crow, nrow = [], []
        for spec in row:
            if isinstance(eval_source, Dataset):
                cnt = int(np.count_nonzero(spec.mask(eval_source)))
                est = estimate(f, eval_source, spec, metric, REAL) if cnt >= min_n else None
            else:
                try:
                    est = _generated_estimate(
                        eval_source.generator if isinstance(eval_source, Augmented) else eval_source,
                        f, spec, metric, n, seed,
                        eval_source.data if isinstance(eval_source, Augmented) else None,
                        SYNTHETIC_PLUS if isinstance(eval_source, Augmented) else SYNTHETIC)
                    cnt = est.n_eval
                except errors.EmptyConditional:
                    est, cnt = None, 0
                if cnt < min_n:
                    est = None
            crow.append(est)
            nrow.append(cnt)
        cells.append(crow)
        counts.append(nrow)
    return IntersectionalMatrix(feature_a, feature_b, [_axis_label(a) for a in axes_a],
                                [_axis_label(b) for b in axes_b], cells, counts, min_n)


def matrix_mae(est: IntersectionalMatrix, oracle: IntersectionalMatrix) -> tuple[float, int]:
    """Mean absolute difference over cells populated in both matrices; returns (mae, cells used)."""
    a = est.values()
    b = oracle.values()
    if a.shape != b.shape:
        raise errors.DimensionMismatch("matrices have different shapes")
    ok = ~np.isnan(a) & ~np.isnan(b)
    k = int(np.count_nonzero(ok))
    return (float(np.mean(np.abs(a[ok] - b[ok]))) if k else math.nan), k


# -- interval quality and fairness -----------------------------------------------------


def coverage_width(intervals, truths) -> tuple[float, float]:
    """Fraction of truths inside their closed interval, and the mean interval width."""
    intervals = [iv if isinstance(iv, PredictionInterval) else PredictionInterval(*iv) for iv in intervals]
    truths = list(truths)
    if len(intervals) != len(truths):
        raise errors.LengthMismatch(f"{len(intervals)} intervals but {len(truths)} truths")
    if not intervals:
        raise errors.LengthMismatch("need at least one interval")
    hits = sum(iv.l <= t <= iv.r for iv, t in zip(intervals, truths))
    width = math.fsum(iv.r - iv.l for iv in intervals) / len(intervals)
    return hits / len(intervals), width


def fairness_ratio(f, D: Dataset, kind: str, sensitive: str, positive: str = "1") -> float:
    kind = kind.lower()
    if kind not in (DI, EO):
        raise errors.ConfigError(f"fairness kind must be 'di' or 'eo', got {kind!r}")
    if D.schema.feature(sensitive).is_continuous:
        raise errors.KindMismatch(f"sensitive feature {sensitive!r} must be categorical")
    return metric_value(Metric(kind, positive, sensitive), D, f.predict(D))[0]


# -- density bands and neighbourhoods ---------------------------------------------------


@dataclass(frozen=True)
class DensityBand:
    q_low: float
    q_high: float
    radius_low: float
    radius_high: float
    size: int


def _check_grid(grid) -> np.ndarray:
    q = np.asarray(grid, dtype=np.float64)
    if q.size < 2 or q[0] != 0.0 or q[-1] != 1.0 or np.any(np.diff(q) <= 0):
        raise errors.ConfigError("density grid must increase strictly from 0 to 1")
    return q


def density_band_report(gen: CopulaGenerator, f, grid, n_total: int, metric=None,
                        seed: int = 0) -> list[tuple[DensityBand, PerfEstimate | None]]:
    """Split a latent-retaining sample into bands of whitened radius and evaluate each band.

    Band ``i`` holds the samples ranked between ``q[i-1]`` and ``q[i]`` of the radii, so
    low bands are the high-density core and the last band the low-density fringe.
    """
    metric = _metric(metric)
    q = _check_grid(grid)
    k = q.size - 1
    if n_total < 50 * k:
        raise errors.ConfigError(f"n_total must be at least {50 * k} for {k} bands")
    ds, Z = gen.sample(n_total, seed, return_latent=True)
    radii = gen.latent_radius(Z)
    order = np.argsort(radii, kind="stable")
    cuts = np.rint(q * n_total).astype(int)
    pred = f.predict(ds)
    out = []
    for i in range(k):
        idx = np.sort(order[cuts[i]:cuts[i + 1]])
        if idx.size == 0:
            out.append((DensityBand(q[i], q[i + 1], math.nan, math.nan, 0), None))
            continue
        band = DensityBand(float(q[i]), float(q[i + 1]), float(radii[idx].min()), float(radii[idx].max()), idx.size)
        v, fl = metric_value(metric, ds.take(idx), pred[idx])
        out.append((band, PerfEstimate(v, SYNTHETIC, idx.size, f"density[{q[i]:g},{q[i + 1]:g}]", flags=fl)))
    return out


def _generator_scales(gen: CopulaGenerator) -> dict:
    out = {}
    for j, feat in enumerate(gen.schema.features):
        if feat.is_continuous and feat.name != gen.schema.label:
            sd = gen.marginals[j].sd
            out[feat.name] = sd if sd > 0 else 1.0
    return out


def neighborhood_report(source, f, center: Mapping, k: int | None = None, eps: float | None = None,
                        metric=None, seed: int = 0, scales: Mapping | None = None) -> PerfEstimate:
    """Performance near a point of interest.

    A dataset source uses its ``k`` nearest rows (or every row within ``eps``); a
    generator source keeps generated rows inside the ``eps`` ball until ``k`` are
    collected.
    """
    metric = _metric(metric)
    if k is not None and k < 1:
        raise errors.ConfigError("k must be >= 1")
    if eps is not None and not eps > 0:
        raise errors.ConfigError("eps must be > 0")
    center = {c: v for c, v in center.items()}
    if isinstance(source, Dataset):
        scales = dict(scales) if scales is not None else feature_scales(source)
        dist = mixed_distance(source, center, scales)
        if eps is not None:
            idx = np.flatnonzero(dist <= eps)
        else:
            idx = np.sort(np.argsort(dist, kind="stable")[:k or DEFAULT_NEIGHBORS])
        if idx.size == 0:
            raise errors.EmptySubgroup("no rows inside the neighbourhood")
        sub = source.take(idx)
        v, fl = metric_value(metric, sub, f.predict(sub))
        return PerfEstimate(v, REAL, idx.size, "neighborhood", flags=fl)
    if not isinstance(source, CopulaGenerator):
        raise errors.ConfigError("neighbourhood sampling needs a dataset or a copula generator")
    if eps is None:
        raise errors.ConfigError("generator neighbourhoods need a radius eps")
    scales = dict(scales) if scales is not None else _generator_scales(source)
    spec = SubgroupSpec((Neighborhood(center, eps, scales),))
    ds = source.sample_subgroup(spec, k or DEFAULT_NEIGHBORS, seed)
    v, fl = metric_value(metric, ds, f.predict(ds))
    return PerfEstimate(v, SYNTHETIC, len(ds), "neighborhood", flags=fl)
