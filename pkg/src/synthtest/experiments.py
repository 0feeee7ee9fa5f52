"""Oracle-comparison experiments on simulated (or user-supplied) data.

Every runner takes an :class:`ExperimentConfig`, writes one JSON file per seed
plus an aggregate under ``cfg.out/<experiment>/``, and returns the aggregate.
Seeds are processed in order and each per-seed file is written as soon as the
seed finishes, so an interrupted run keeps its completed seeds.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import errors
from .baselines import (atc_predict, bootstrap_interval, doc_predict, im_predict, ms_baseline,
                        rs_baseline, source_all)
from .data import Dataset, SubgroupSpec, category, category_subgroups, load_csv, load_schema, split
from .evaluation import (Augmented, balanced_subgroup_report, coverage_width, estimate,
                         intersectional_matrix, largest_subgroup, matrix_mae)
from .generator import fit_copula, fit_ensemble
from .groundtruth import GroundTruthSpec, simulate_ground_truth
from .metrics import Metric, metric_value
from .predictors import KINDS, fit_predictor
from .shifts import (BUCKETS, EmpiricalPrior, MeanShift, PriorSpec, default_grid, generate_with_prior,
                     rejection_sample, sensitivity_sweep, shift_for)
from .utils import derive_seed, read_json, write_json

log = logging.getLogger(__name__)

SUBGROUP = "subgroup"
INTERSECTIONAL = "intersectional"
SHIFT = "shift"
PRIOR = "prior"
EXPERIMENTS = (SUBGROUP, INTERSECTIONAL, SHIFT, PRIOR)


@dataclass
class ShiftSettings:
    feature: str = "age"
    grid: tuple | None = None
    points: int = 21
    n_synth: int = 5000
    n_oracle: int = 10000
    k_ensemble: int = 1


@dataclass
class PriorSettings:
    # observed target features, in the order they become known
    features: tuple = ("age", "income", "group", "region")
    # exponential tilt per standardized continuous feature (clipped at +-clip sds)
    linear: dict = field(default_factory=lambda: {"age": 1.0, "income": 0.6})
    # relative weight of every category
    categorical: dict = field(default_factory=lambda: {"group": [1.0, 2.0, 4.0, 8.0],
                                                        "region": [0.5, 1.0, 1.5, 3.0]})
    clip: float = 2.5
    population: int = 1_000_000
    n_target: int = 5000
    n_synth: int = 5000


@dataclass
class ExperimentConfig:
    out: str = "results"
    seeds: tuple = tuple(range(20))
    schema: str | None = None
    data: str | None = None
    ground_truth: str | dict | None = None
    n_rows: int = 30000
    fractions: tuple = (0.28, 0.07, 0.65)
    model: str = "logistic"
    models: tuple = KINDS
    hyper: dict = field(default_factory=dict)
    k_ensemble: int = 5
    lam: float = 0.01
    n_per_member: int | None = None
    subgroup_feature: str = "group"
    cross_feature: str = "region"
    subgroups: tuple | None = None
    metric: str = "accuracy"
    bootstrap_b: int = 200
    small_n: int = 100
    min_n: int = 100
    intersectional_k: int = 1
    shift: ShiftSettings = field(default_factory=ShiftSettings)
    prior: PriorSettings = field(default_factory=PriorSettings)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.fractions = tuple(float(f) for f in self.fractions)
        self.models = tuple(self.models)
        if not self.seeds:
            raise errors.ConfigError("seeds must be non-empty")
        if self.k_ensemble < 1 or self.intersectional_k < 1 or self.shift.k_ensemble < 1:
            raise errors.ConfigError("ensemble sizes must be >= 1")
        if (self.data is None) != (self.schema is None):
            raise errors.ConfigError("data and schema must be given together")
        if self.data is not None and self.ground_truth is not None:
            raise errors.ConfigError("give either data or a ground-truth spec, not both")
        for p in (self.schema, self.data, self.ground_truth if isinstance(self.ground_truth, str) else None):
            if p is not None and not Path(p).exists():
                raise errors.ConfigError(f"referenced file does not exist: {p}")
        for k in (self.model, *self.models):
            if k not in KINDS:
                raise errors.ConfigError(f"unknown model kind {k!r}")
        Metric.parse(self.metric)

    @classmethod
    def from_dict(cls, d: Mapping, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise errors.ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("schema", "data", "ground_truth", "out"):
            if isinstance(d.get(key), str) and base_dir is not None and not Path(d[key]).is_absolute():
                d[key] = str(Path(base_dir) / d[key])
        for key, sub in (("shift", ShiftSettings), ("prior", PriorSettings)):
            if key in d:
                sd = dict(d[key] or {})
                bad = set(sd) - {f.name for f in fields(sub)}
                if bad:
                    raise errors.ConfigError(f"unknown {key} keys: {sorted(bad)}")
                for t in ("grid", "features"):
                    if sd.get(t) is not None:
                        sd[t] = tuple(sd[t])
                d[key] = sub(**sd)
        for key in ("seeds", "fractions", "models"):
            if key in d:
                d[key] = tuple(d[key])
        if d.get("subgroups") is not None:
            d["subgroups"] = tuple(d["subgroups"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise errors.ConfigError(f"malformed config: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)

    def gt_spec(self) -> GroundTruthSpec:
        if isinstance(self.ground_truth, dict):
            return GroundTruthSpec.from_dict(self.ground_truth)
        if isinstance(self.ground_truth, str):
            return GroundTruthSpec.load(self.ground_truth)
        return GroundTruthSpec()


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a JSON config; relative paths inside it resolve against its directory."""
    d = read_json(path)
    if not isinstance(d, dict):
        raise errors.ConfigError(f"{path} must hold a JSON object")
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d, base_dir=Path(path).parent)


# -- shared plumbing --------------------------------------------------------------------


class _Source:
    """Supplies the (train, test, oracle) split for every seed."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.gt = None
        self.data = None
        if cfg.data is not None:
            self.data = load_csv(cfg.data, load_schema(cfg.schema))
        else:
            self.gt = cfg.gt_spec()

    @property
    def schema(self):
        return self.data.schema if self.data is not None else self.gt.schema

    def splits(self, seed: int):
        ds = self.data if self.data is not None else simulate_ground_truth(self.gt, self.cfg.n_rows, seed)
        return split(ds, self.cfg.fractions, seed)


def _parse_subgroup(schema, text: str) -> SubgroupSpec:
    if text in ("*", "all"):
        return SubgroupSpec()
    feat, sep, value = text.partition("=")
    if not sep:
        raise errors.ConfigError(f"subgroup must look like feature=value, got {text!r}")
    schema.feature(feat.strip()).code(value.strip())
    return category(feat.strip(), value.strip())


def subgroups_for(cfg: ExperimentConfig, schema) -> list[SubgroupSpec]:
    if cfg.subgroups is None:
        return category_subgroups(schema, cfg.subgroup_feature)
    return [_parse_subgroup(schema, s) for s in cfg.subgroups]


def _abs(a, b):
    return None if a is None or b is None else abs(a - b)


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def _max(xs):
    xs = [x for x in xs if x is not None]
    return float(np.max(xs)) if xs else None


def _seed_path(cfg, kind, seed) -> Path:
    return Path(cfg.out) / kind / f"seed_{seed:03d}.json"


# -- subgroup experiment ---------------------------------------------------------------

SUBGROUP_SOURCES = ("real", "3S", "3S+", "bootstrap")


def subgroup_seed(cfg: ExperimentConfig, source: _Source, seed: int) -> dict:
    metric = Metric.parse(cfg.metric)
    train, test, oracle = source.splits(seed)
    f = fit_predictor(cfg.model, train, cfg.hyper, seed)
    subs = subgroups_for(cfg, source.schema)
    ens = fit_ensemble(test, cfg.k_ensemble, cfg.lam, seed)
    n = cfg.n_per_member or largest_subgroup(test, subs)
    sample_seed = derive_seed(seed, 1)
    syn = balanced_subgroup_report(ens, f, subs, metric, sample_seed, reference=test, n=n)
    plus = balanced_subgroup_report(Augmented(test, ens), f, subs, metric, sample_seed, n=n)
    rows = []
    for i, (spec, s3, sp) in enumerate(zip(subs, syn, plus)):
        n_test = int(np.count_nonzero(spec.mask(test)))
        rec = {"subgroup": spec.describe(), "n_test": n_test,
               "n_oracle": int(np.count_nonzero(spec.mask(oracle))),
               "3S": s3.value, "3S_low": s3.low, "3S_high": s3.high, "3S_std": s3.std,
               "3S+": sp.value, "real": None, "bootstrap": None,
               "bootstrap_low": None, "bootstrap_high": None}
        rec["oracle"] = estimate(f, oracle, spec, metric).value if rec["n_oracle"] else None
        if n_test:
            rec["real"] = estimate(f, test, spec, metric).value
            b = bootstrap_interval(f, test, spec, metric, cfg.bootstrap_b, derive_seed(seed, 2, i))
            rec.update(bootstrap=b.estimate, bootstrap_low=b.low, bootstrap_high=b.high)
        rows.append(rec)
    return {"kind": "subgroup_seed", "seed": seed, "model": cfg.model, "metric": metric.name,
            "k_ensemble": cfg.k_ensemble, "n_per_member": n, "subgroups": rows}


def aggregate_subgroups(results: Sequence[dict], small_n: int = 100) -> dict:
    """Mean and worst-case absolute error per (source, subgroup), small-subgroup summary, coverage."""
    names = [r["subgroup"] for r in results[0]["subgroups"]]
    per = {}
    for k, name in enumerate(names):
        recs = [r["subgroups"][k] for r in results]
        entry = {"n_test_mean": float(np.mean([x["n_test"] for x in recs]))}
        for src in SUBGROUP_SOURCES:
            errs = [_abs(x[src], x["oracle"]) for x in recs]
            entry[src] = {"mae": _mean(errs), "worst": _max(errs)}
        per[name] = entry
    pairs = [x for r in results for x in r["subgroups"]
             if x["n_test"] < small_n and x["real"] is not None and x["oracle"] is not None]
    real_err = [abs(x["real"] - x["oracle"]) for x in pairs]
    syn_err = [abs(x["3S"] - x["oracle"]) for x in pairs]
    small = {
        "pairs": len(pairs),
        "subgroups": [n for n in names if per[n]["n_test_mean"] < small_n],
        "real_mae": _mean(real_err),
        "3S_mae": _mean(syn_err),
        "win_rate": float(np.mean([s < r for s, r in zip(syn_err, real_err)])) if pairs else None,
    }
    small["reduction"] = (1.0 - small["3S_mae"] / small["real_mae"]
                          if pairs and small["real_mae"] > 0 else None)
    cov = {}
    for src in ("3S", "bootstrap"):
        ok = [x for r in results for x in r["subgroups"]
              if x[f"{src}_low"] is not None and x["oracle"] is not None]
        if ok:
            c, w = coverage_width([(x[f"{src}_low"], x[f"{src}_high"]) for x in ok], [x["oracle"] for x in ok])
            cov[src] = {"coverage": c, "width": w, "cases": len(ok)}
    return {"kind": "subgroup_aggregate", "seeds": [r["seed"] for r in results], "per_subgroup": per,
            "small": small, "coverage": cov, "small_n": small_n}


def run_subgroup_experiment(cfg: ExperimentConfig) -> dict:
    source = _Source(cfg)
    results = []
    for seed in cfg.seeds:
        res = subgroup_seed(cfg, source, seed)
        write_json(_seed_path(cfg, SUBGROUP, seed), res)
        results.append(res)
        log.info("subgroup seed %d done", seed)
    agg = aggregate_subgroups(results, cfg.small_n)
    write_json(Path(cfg.out) / SUBGROUP / "aggregate.json", agg)
    return agg


# -- intersectional experiment ------------------------------------------------------------


def intersectional_seed(cfg: ExperimentConfig, source: _Source, seed: int) -> dict:
    metric = Metric.parse(cfg.metric)
    train, test, oracle = source.splits(seed)
    gen = fit_ensemble(test, cfg.intersectional_k, cfg.lam, seed)
    a, b = cfg.subgroup_feature, cfg.cross_feature
    out = {}
    for kind in cfg.models:
        f = fit_predictor(kind, train, cfg.hyper if kind == cfg.model else {}, seed)
        mo = intersectional_matrix(f, oracle, a, b, metric, cfg.min_n)
        mr = intersectional_matrix(f, test, a, b, metric, cfg.min_n)
        ms = intersectional_matrix(f, gen, a, b, metric, cfg.min_n, derive_seed(seed, 1), reference=test)
        (er, nr), (es, ns) = matrix_mae(mr, mo), matrix_mae(ms, mo)
        out[kind] = {"oracle": mo.to_dict(), "real": mr.to_dict(), "3S": ms.to_dict(),
                     "mae_real": er, "cells_real": nr, "mae_3S": es, "cells_3S": ns}
    return {"kind": "intersectional_seed", "seed": seed, "features": [a, b], "models": out,
            "metric": metric.name, "min_n": cfg.min_n}


def run_intersectional_experiment(cfg: ExperimentConfig) -> dict:
    source = _Source(cfg)
    results = []
    for seed in cfg.seeds:
        res = intersectional_seed(cfg, source, seed)
        write_json(_seed_path(cfg, INTERSECTIONAL, seed), res)
        results.append(res)
    per_model = {}
    for kind in cfg.models:
        per_model[kind] = {
            "mae_real": _mean([r["models"][kind]["mae_real"] for r in results]),
            "mae_3S": _mean([r["models"][kind]["mae_3S"] for r in results]),
            "cells_real": float(np.mean([r["models"][kind]["cells_real"] for r in results])),
            "cells_3S": float(np.mean([r["models"][kind]["cells_3S"] for r in results])),
        }
    agg = {"kind": "intersectional_aggregate", "seeds": list(cfg.seeds), "per_model": per_model,
           "mae_real": _mean([v["mae_real"] for v in per_model.values()]),
           "mae_3S": _mean([v["mae_3S"] for v in per_model.values()])}
    write_json(Path(cfg.out) / INTERSECTIONAL / "aggregate.json", agg)
    return agg


# -- shift sweep experiment --------------------------------------------------------------

SHIFT_METHODS = ("3S", "MS", "RS")


def write_curve_csv(path, points) -> None:
    """Curve rows ``feature,s,bucket,metric,estimate,std``; std is blank without an ensemble."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "s", "bucket", "metric", "estimate", "std"])
        for p in points:
            w.writerow([p.feature, repr(float(p.s)), p.bucket, p.metric, repr(float(p.estimate)),
                        "" if p.std is None else repr(float(p.std))])


def shift_seed(cfg: ExperimentConfig, source: _Source, seed: int) -> dict:
    st = cfg.shift
    metric = Metric.parse(cfg.metric)
    train, test, oracle = source.splits(seed)
    f = fit_predictor(cfg.model, train, cfg.hyper, seed)
    gen = fit_copula(test, cfg.lam, seed) if st.k_ensemble == 1 else fit_ensemble(test, st.k_ensemble, cfg.lam, seed)
    grid = list(st.grid) if st.grid is not None else list(default_grid(test.column(st.feature), st.points))
    curve = sensitivity_sweep(gen, f, st.feature, grid, st.n_synth, derive_seed(seed, 1), metric)
    write_curve_csv(Path(cfg.out) / SHIFT / f"curve_seed_{seed:03d}.csv", curve)
    points = []
    for i, cp in enumerate(curve):
        shift = shift_for(test.schema, st.feature, cp.s)
        rec = {"s": cp.s, "bucket": cp.bucket, "3S": cp.estimate, "3S_std": cp.std,
               "MS": None, "RS": None, "oracle": None, "flags": []}
        try:
            o = rejection_sample(oracle, shift, st.n_oracle, seed=derive_seed(seed, 3, i))
            rec["oracle"] = metric_value(metric, o, f.predict(o))[0]
        except errors.AcceptanceStall as exc:
            log.warning("seed %d s=%g: oracle unavailable (%s)", seed, cp.s, exc)
            rec["flags"].append("oracle_stall")
        if isinstance(shift, MeanShift):
            rec["MS"] = ms_baseline(test, f, st.feature, cp.s, metric).estimate
        try:
            rec["RS"] = rs_baseline(test, f, shift, len(test), metric, derive_seed(seed, 4, i)).estimate
        except errors.AcceptanceStall:
            rec["flags"].append("rs_stall")
        points.append(rec)
    return {"kind": "shift_seed", "seed": seed, "feature": st.feature, "metric": metric.name,
            "test_estimate": estimate(f, test, None, metric).value, "points": points}


def bucket_table(results: Sequence[dict]) -> dict:
    """Mean absolute error vs the oracle per method, overall ("Mean") and per bucket."""
    table = {}
    for m in SHIFT_METHODS:
        row = {}
        errs = {b: [] for b in BUCKETS}
        for r in results:
            for p in r["points"]:
                e = _abs(p[m], p["oracle"])
                if e is not None:
                    errs[p["bucket"]].append(e)
        row["Mean"] = _mean([e for b in BUCKETS for e in errs[b]])
        for b in BUCKETS:
            row[b] = _mean(errs[b])
            row[f"n{b}"] = len(errs[b])
        table[m] = row
    return table


def write_bucket_csv(path, table: Mapping) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "Mean", *BUCKETS])
        for m, row in table.items():
            w.writerow([m, *["" if row[c] is None else repr(row[c]) for c in ("Mean", *BUCKETS)]])


def run_shift_experiment(cfg: ExperimentConfig) -> dict:
    source = _Source(cfg)
    results = []
    for seed in cfg.seeds:
        res = shift_seed(cfg, source, seed)
        write_json(_seed_path(cfg, SHIFT, seed), res)
        results.append(res)
    table = bucket_table(results)
    write_bucket_csv(Path(cfg.out) / SHIFT / "buckets.csv", table)
    agg = {"kind": "shift_aggregate", "seeds": list(cfg.seeds), "feature": cfg.shift.feature,
           "buckets": table, "columns": ["Mean", *BUCKETS]}
    write_json(Path(cfg.out) / SHIFT / "aggregate.json", agg)
    return agg


# -- prior-knowledge experiment ------------------------------------------------------------

PRIOR_BASELINES = ("ATC", "DOC", "IM", "Source-All", "Source-RS")


def target_weights(gt: GroundTruthSpec, pop: Dataset, st: PriorSettings) -> np.ndarray:
    """Unnormalized target/source density ratio of every population row."""
    logw = np.zeros(len(pop))
    for name, beta in st.linear.items():
        k = list(gt.continuous).index(name)
        z = (pop.column(name) - gt.centers[k]) / gt.scales[k]
        logw += float(beta) * np.clip(z, -st.clip, st.clip)
    w = np.exp(logw)
    for name, rel in st.categorical.items():
        rel = np.asarray(rel, dtype=np.float64)
        if rel.size != pop.schema.feature(name).n_categories or np.any(rel <= 0):
            raise errors.ConfigError(f"category weights for {name!r} must be positive, one per category")
        w *= rel[pop.codes(name)]
    return w


def build_target(gt: GroundTruthSpec, st: PriorSettings, seed: int) -> Dataset:
    """Target-domain sample by exact rejection from a large simulated population."""
    pop = simulate_ground_truth(gt, st.population, derive_seed(seed, 90))
    w = target_weights(gt, pop, st)
    u = np.random.default_rng(derive_seed(seed, 91)).random(len(pop))
    idx = np.flatnonzero(u < w / w.max())[: st.n_target]
    if idx.size < 100:
        raise errors.AcceptanceStall(f"only {idx.size} population rows accepted into the target")
    return pop.take(idx)


def prior_seed(cfg: ExperimentConfig, source: _Source, seed: int) -> dict:
    if source.gt is None:
        raise errors.ConfigError("the prior-knowledge experiment needs a ground-truth spec")
    st = cfg.prior
    metric = Metric.parse(cfg.metric)
    train, test, _ = source.splits(seed)
    target = build_target(source.gt, st, seed)
    gen = fit_copula(test, cfg.lam, seed)
    feats = list(st.features)
    priors = [PriorSpec([EmpiricalPrior.from_dataset(target, feats[:k])]) for k in range(1, len(feats) + 1)]
    syn = [generate_with_prior(gen, p, st.n_synth, derive_seed(seed, 1)) for p in priors]
    rs_rows = [rejection_sample(test, p, len(test), seed=derive_seed(seed, 4)) for p in priors]
    models = {}
    for kind in cfg.models:
        f = fit_predictor(kind, train, cfg.hyper if kind == cfg.model else {}, seed)
        truth = metric_value(metric, target, f.predict(target))[0]
        rec = {"target": truth,
               "3S": [metric_value(metric, d, f.predict(d))[0] for d in syn],
               "RS_by_k": [metric_value(metric, d, f.predict(d))[0] for d in rs_rows]}
        rec["ATC"] = atc_predict(f, test, target).estimate
        rec["DOC"] = doc_predict(f, test, target).estimate
        rec["IM"] = im_predict(f, test, target).estimate
        rec["Source-All"] = source_all(f, test, metric).estimate
        rec["Source-RS"] = rec["RS_by_k"][-1]
        models[kind] = rec
    return {"kind": "prior_seed", "seed": seed, "features": feats, "n_target": len(target),
            "metric": metric.name, "models": models}


def aggregate_prior(results: Sequence[dict]) -> dict:
    feats = results[0]["features"]
    recs = [m for r in results for m in r["models"].values()]
    by_k = [_mean([abs(m["3S"][k] - m["target"]) for m in recs]) for k in range(len(feats))]
    rs_k = [_mean([abs(m["RS_by_k"][k] - m["target"]) for m in recs]) for k in range(len(feats))]
    base = {b: _mean([abs(m[b] - m["target"]) for m in recs]) for b in PRIOR_BASELINES}
    per_model = {}
    for kind in results[0]["models"]:
        ms = [r["models"][kind] for r in results]
        per_model[kind] = {"3S": _mean([abs(m["3S"][-1] - m["target"]) for m in ms]),
                           **{b: _mean([abs(m[b] - m["target"]) for m in ms]) for b in PRIOR_BASELINES}}
    return {"kind": "prior_aggregate", "seeds": [r["seed"] for r in results], "features": feats,
            "3S_error_by_k": by_k, "RS_error_by_k": rs_k, "baselines": base, "per_model": per_model}


def run_prior_experiment(cfg: ExperimentConfig) -> dict:
    source = _Source(cfg)
    results = []
    for seed in cfg.seeds:
        res = prior_seed(cfg, source, seed)
        write_json(_seed_path(cfg, PRIOR, seed), res)
        results.append(res)
    agg = aggregate_prior(results)
    with open(Path(cfg.out) / PRIOR / "curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n_features", "method", "mean_abs_error"])
        for k, (a, b) in enumerate(zip(agg["3S_error_by_k"], agg["RS_error_by_k"]), start=1):
            w.writerow([k, "3S", repr(a)])
            w.writerow([k, "Source-RS", repr(b)])
    write_json(Path(cfg.out) / PRIOR / "aggregate.json", agg)
    return agg


RUNNERS = {SUBGROUP: run_subgroup_experiment, INTERSECTIONAL: run_intersectional_experiment,
           SHIFT: run_shift_experiment, PRIOR: run_prior_experiment}


def run_experiment(cfg: ExperimentConfig, which: str) -> dict:
    if which not in RUNNERS:
        raise errors.ConfigError(f"unknown experiment {which!r}; choose from {EXPERIMENTS}")
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    settings = {k: v for k, v in cfg.to_dict().items() if k != "out"}
    write_json(Path(cfg.out) / which / "config.json", {"kind": "config", "experiment": which, **settings})
    return RUNNERS[which](cfg)
