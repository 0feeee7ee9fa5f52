"""Command-line entry point: ``synthtest <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors
from .data import category_subgroups, load_csv, load_schema, save_schema, write_csv
from .evaluation import Augmented, balanced_subgroup_report, fairness_ratio, intersectional_matrix
from .experiments import EXPERIMENTS, load_config, ExperimentConfig, run_experiment, write_curve_csv
from .generator import GeneratorEnsemble, fit_ensemble, load_generators, member_seed, save_generators
from .groundtruth import GroundTruthSpec, simulate_ground_truth
from .metrics import Metric, metric_value
from .predictors import KINDS, fit_predictor, load_external
from .quality import DEFAULT_CANDIDATES, holdout_split, select_generator
from .report import emit_model_report
from .shifts import EmpiricalPrior, PriorSpec, generate_with_prior, sensitivity_sweep
from .baselines import rs_baseline
from .utils import RunLock, write_json

log = logging.getLogger("synthtest")


def _shared(p: argparse.ArgumentParser, k_default: int | None = None) -> None:
    p.add_argument("--schema", help="schema JSON")
    p.add_argument("--data", help="CSV of the real (test) data")
    p.add_argument("--predictions", help="CSV of external predictions: row_index,label,confidence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-ensemble", type=int, default=k_default, help="number of generators")
    p.add_argument("--n-synth", type=int, default=None, help="synthetic rows per generator")
    p.add_argument("--out", required=True, help="output directory")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train", help="CSV used to fit the model under test")
    p.add_argument("--model", choices=KINDS, default="logistic")
    p.add_argument("--generator", help="directory written by fit-gen (fits on --data when omitted)")
    p.add_argument("--lam", type=float, default=0.05, help="correlation shrinkage")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="synthtest", description="Synthetic test data for model evaluation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a dataset from a ground-truth spec")
    _shared(p)
    p.add_argument("--ground-truth", help="ground-truth spec JSON (built-in spec when omitted)")
    p.add_argument("--n", type=int, default=30000)

    p = sub.add_parser("fit-gen", help="fit a copula generator or ensemble")
    _shared(p, k_default=1)
    p.add_argument("--lam", type=float, default=0.05)
    p.add_argument("--select", action="store_true", help="pick shrinkage by holdout MMD first")

    p = sub.add_parser("eval-subgroups", help="subgroup estimates from real and synthetic data")
    _shared(p, k_default=5)
    _model_args(p)
    p.add_argument("--subgroup-feature", help="one subgroup per category of this feature")
    p.add_argument("--cross", help="second feature for an intersectional matrix")
    p.add_argument("--metric", default="accuracy", help="accuracy, f1, di:<feature> or eo:<feature>")
    p.add_argument("--fairness", help="sensitive feature for DI/EO ratios")
    p.add_argument("--min-n", type=int, default=100)

    p = sub.add_parser("shift-sweep", help="sensitivity curve under marginal shifts of one feature")
    _shared(p, k_default=1)
    _model_args(p)
    p.add_argument("--feature", required=True)
    p.add_argument("--category", help="target category when sweeping a categorical feature")
    p.add_argument("--grid", type=float, nargs="+", help="shift values (default: spans the feature range)")
    p.add_argument("--metric", default="accuracy")

    p = sub.add_parser("shift-prior", help="estimate target-domain performance from observed target marginals")
    _shared(p, k_default=1)
    _model_args(p)
    p.add_argument("--target", required=True, help="CSV with the observed target features")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--metric", default="accuracy")

    p = sub.add_parser("oracle-compare", help="run an oracle-comparison experiment")
    _shared(p)
    p.add_argument("--config", help="experiment config JSON (built-in defaults when omitted)")
    p.add_argument("--experiment", choices=(*EXPERIMENTS, "all"), default="subgroup")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1 instead of the configured list")

    p = sub.add_parser("report", help="assemble report.md and CSVs from result files")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    return ap


# -- helpers ---------------------------------------------------------------------------


def _need(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise errors.ConfigError(f"{args.command} needs " + ", ".join(f"--{n}" for n in missing))


def _real(args):
    _need(args, "schema", "data")
    schema = load_schema(args.schema)
    return schema, load_csv(args.data, schema)


def _predictor(args, schema):
    if args.train is not None:
        return fit_predictor(args.model, load_csv(args.train, schema), seed=args.seed), True
    if args.predictions is not None:
        return load_external(args.predictions, schema), False
    raise errors.ConfigError(f"{args.command} needs --train (to fit a model) or --predictions")


def _generator(args, test, k: int) -> GeneratorEnsemble:
    if args.generator is not None:
        ens = load_generators(args.generator)
        if ens.schema != test.schema:
            raise errors.SchemaError("generator schema differs from the data schema")
        return ens
    return fit_ensemble(test, k, args.lam, args.seed)


def _read_columns(path, schema, features) -> np.ndarray:
    """Encoded values of ``features`` from a CSV that may hold only those columns."""
    path = Path(path)
    if not path.exists():
        raise errors.ConfigError(f"target file not found: {path}")
    feats = [schema.feature(f) for f in features]
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [f for f in features if f not in header]
        if missing:
            raise errors.MissingColumn(f"{path}: missing columns {missing}")
        for r, rec in enumerate(reader):
            rec = {k.strip(): (v or "").strip() for k, v in rec.items()}
            out = []
            for feat in feats:
                raw = rec[feat.name]
                if raw == "":
                    raise errors.MissingValue(f"row {r}: missing value for {feat.name!r}")
                if feat.is_continuous:
                    try:
                        out.append(float(raw))
                    except ValueError:
                        raise errors.UnparseableNumber(feat.name, raw, r) from None
                else:
                    out.append(feat.code(raw))
            rows.append(out)
    if not rows:
        raise errors.EmptyFile(f"{path} has no rows")
    return np.asarray(rows, dtype=np.float64)


# -- subcommands ---------------------------------------------------------------------------


def cmd_simulate(args):
    spec = GroundTruthSpec.load(args.ground_truth) if args.ground_truth else GroundTruthSpec()
    ds = simulate_ground_truth(spec, args.n, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / "data.csv")
    save_schema(ds.schema, out / "schema.json")
    write_json(out / "ground_truth.json", spec.to_dict())
    print(f"wrote {len(ds)} rows to {out / 'data.csv'}")


def cmd_fit_gen(args):
    schema, data = _real(args)
    lam = args.lam
    out = Path(args.out)
    if args.select:
        fit_part, hold = holdout_split(data, 0.1, args.seed)
        best, scores = select_generator(DEFAULT_CANDIDATES, fit_part, hold, seed=args.seed)
        lam = float(best["lambda"])
        write_json(out / "selection.json", {"kind": "selection", "best": best,
                                            "scores": [s.to_dict() for s in scores]})
    ens = fit_ensemble(data, args.k_ensemble, lam, args.seed)
    paths = save_generators(ens, out)
    print(f"wrote {len(paths)} generator file(s) to {out} (lambda={lam:g})")


def cmd_eval_subgroups(args):
    schema, test = _real(args)
    f, can_generate = _predictor(args, schema)
    metric = Metric.parse(args.metric)
    feature = args.subgroup_feature
    if feature is None:
        raise errors.ConfigError("eval-subgroups needs --subgroup-feature")
    subs = category_subgroups(schema, feature)
    doc = {"kind": "subgroup_report", "metric": metric.name, "subgroup_feature": feature,
           "estimates": {}, "matrices": {}, "fairness": {}}
    real = balanced_subgroup_report(test, f, subs, metric)
    doc["estimates"]["real"] = [e.to_dict() for e in real]
    ens = None
    if can_generate:
        ens = _generator(args, test, args.k_ensemble)
        src = ens if ens.K > 1 else ens.members[0]
        syn = balanced_subgroup_report(src, f, subs, metric, args.seed, reference=test, n=args.n_synth)
        plus = balanced_subgroup_report(Augmented(test, src), f, subs, metric, args.seed, n=args.n_synth)
        doc["estimates"]["3S"] = [e.to_dict() for e in syn]
        doc["estimates"]["3S+"] = [e.to_dict() for e in plus]
    else:
        log.warning("external predictions cover real rows only; synthetic estimates skipped")
    if args.cross:
        doc["matrices"]["real"] = intersectional_matrix(f, test, feature, args.cross, metric, args.min_n).to_dict()
        if ens is not None:
            doc["matrices"]["3S"] = intersectional_matrix(f, ens, feature, args.cross, metric, args.min_n,
                                                          args.seed, reference=test, n=args.n_synth).to_dict()
    if args.fairness:
        doc["fairness"]["real"] = {k: fairness_ratio(f, test, k, args.fairness) for k in ("di", "eo")}
        if ens is not None:
            syn = ens.members[0].sample(args.n_synth or len(test), args.seed)
            doc["fairness"]["3S"] = {k: fairness_ratio(f, syn, k, args.fairness) for k in ("di", "eo")}
    write_json(Path(args.out) / "subgroups.json", doc)
    print(f"wrote {Path(args.out) / 'subgroups.json'}")


def cmd_shift_sweep(args):
    schema, test = _real(args)
    f, can_generate = _predictor(args, schema)
    if not can_generate:
        raise errors.ConfigError("shift-sweep evaluates synthetic rows and needs --train")
    ens = _generator(args, test, args.k_ensemble)
    src = ens if ens.K > 1 else ens.members[0]
    metric = Metric.parse(args.metric)
    curve = sensitivity_sweep(src, f, args.feature, args.grid, args.n_synth or 5000, args.seed, metric,
                              args.category)
    out = Path(args.out)
    write_curve_csv(out / "curve.csv", curve)
    write_json(out / "sweep.json", {
        "kind": "shift_sweep", "feature": args.feature, "metric": metric.name, "k_ensemble": ens.K,
        "points": [{"s": p.s, "bucket": p.bucket, "estimate": p.estimate, "std": p.std} for p in curve]})
    print(f"wrote {len(curve)} curve points to {out / 'curve.csv'}")


def cmd_shift_prior(args):
    schema, test = _real(args)
    f, can_generate = _predictor(args, schema)
    if not can_generate:
        raise errors.ConfigError("shift-prior evaluates synthetic rows and needs --train")
    ens = _generator(args, test, args.k_ensemble)
    metric = Metric.parse(args.metric)
    prior = PriorSpec([EmpiricalPrior(tuple(args.features), _read_columns(args.target, schema, args.features))])
    vals = []
    for k, g in enumerate(ens.members):
        syn = generate_with_prior(g, prior, args.n_synth or 5000, member_seed(args.seed, k))
        vals.append(metric_value(metric, syn, f.predict(syn))[0])
    rs = rs_baseline(test, f, prior, len(test), metric, args.seed)
    doc = {"kind": "prior_estimate", "features": list(args.features), "metric": metric.name,
           "estimate": float(np.mean(vals)), "members": vals,
           "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else None,
           "baselines": {"Source-RS": rs.estimate,
                         "Source-All": metric_value(metric, test, f.predict(test))[0]}}
    write_json(Path(args.out) / "prior.json", doc)
    print(f"estimated {metric.name}: {doc['estimate']:.4f}")


def cmd_oracle_compare(args):
    overrides = {"out": args.out}
    if args.seeds is not None:
        overrides["seeds"] = list(range(args.seeds))
    if args.k_ensemble is not None:
        overrides["k_ensemble"] = args.k_ensemble
    if args.n_synth is not None:
        overrides["n_per_member"] = args.n_synth
    if args.config:
        cfg = load_config(args.config, **overrides)
    else:
        cfg = ExperimentConfig.from_dict({k: (tuple(v) if isinstance(v, list) else v) for k, v in overrides.items()})
    which = EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    with RunLock(cfg.out):
        for w in which:
            run_experiment(cfg, w)
            print(f"{w}: results in {Path(cfg.out) / w}")


def cmd_report(args):
    path = emit_model_report(args.results, args.out)
    print(f"wrote {path}")


COMMANDS = {"simulate": cmd_simulate, "fit-gen": cmd_fit_gen, "eval-subgroups": cmd_eval_subgroups,
            "shift-sweep": cmd_shift_sweep, "shift-prior": cmd_shift_prior,
            "oracle-compare": cmd_oracle_compare, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except errors.SynthTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
