"""Markdown + CSV model report assembled from stored result JSON files.

Nothing here recomputes an estimate: every number in the report is read from a
JSON file under the results directory, so each one traces back to its source.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from . import errors
from .evaluation import IntersectionalMatrix
from .shifts import BUCKETS

KNOWN_KINDS = ("subgroup_report", "subgroup_aggregate", "intersectional_seed", "intersectional_aggregate",
               "shift_sweep", "shift_seed", "shift_aggregate", "prior_aggregate", "prior_estimate")


def _fmt(x, digits: int = 4) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return "NA"
    if isinstance(x, float):
        return f"{x:.{digits}f}"
    return str(x)


def collect_results(results_dir) -> list[tuple[Path, dict]]:
    """Every result JSON under ``results_dir`` with a recognised ``kind``, in path order."""
    root = Path(results_dir)
    if not root.is_dir():
        raise errors.MissingResults(f"results directory not found: {root}")
    found = []
    for path in sorted(root.rglob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            continue
        if isinstance(doc, dict) and doc.get("kind") in KNOWN_KINDS:
            found.append((path, doc))
    if not found:
        raise errors.MissingResults(f"no result files in {root}")
    return found


# -- matrices --------------------------------------------------------------------------


def matrix_markdown(m: IntersectionalMatrix) -> list[str]:
    """Markdown table; cells below the sample cut-off render as ``NA(n<min_n)``."""
    na = f"NA(n<{m.min_n})"
    lines = ["| " + " | ".join([f"{m.feature_a} \\ {m.feature_b}", *map(str, m.labels_b)]) + " |",
             "|" + "---|" * (len(m.labels_b) + 1)]
    for la, row in zip(m.labels_a, m.cells):
        lines.append("| " + " | ".join([str(la), *[na if c is None else _fmt(c.value) for c in row]]) + " |")
    return lines


def write_matrix_csv(m: IntersectionalMatrix, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(m.csv_rows(na="NA(n<{min_n})"))


def worst_cell(m: IntersectionalMatrix):
    """(label_a, label_b, value) of the lowest populated cell; ties go to the first in row order."""
    best = None
    for la, row in zip(m.labels_a, m.cells):
        for lb, c in zip(m.labels_b, row):
            if c is not None and (best is None or c.value < best[2]):
                best = (la, lb, c.value)
    return best


def _insight_cell(m: IntersectionalMatrix, what: str) -> str:
    w = worst_cell(m)
    if w is None:
        return f"- {what}: every cell is below the {m.min_n}-row cut-off."
    return (f"- {what}: lowest cell is {m.feature_a}={w[0]} x {m.feature_b}={w[1]} "
            f"at {_fmt(w[2])}.")


# -- curves ----------------------------------------------------------------------------


def steepest_segment(points):
    """Largest absolute slope between consecutive (s, estimate) points: (s0, s1, slope)."""
    pts = sorted((float(p["s"]), float(p["estimate"])) for p in points if p.get("estimate") is not None)
    best = None
    for (s0, e0), (s1, e1) in zip(pts, pts[1:]):
        if s1 == s0:
            continue
        slope = (e1 - e0) / (s1 - s0)
        if best is None or abs(slope) > abs(best[2]):
            best = (s0, s1, slope)
    return best


def write_curve_rows(path, feature: str, metric: str, points) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "s", "bucket", "metric", "estimate", "std"])
        for p in points:
            w.writerow([feature, repr(float(p["s"])), p.get("bucket", "NA"), metric,
                        "" if p.get("estimate") is None else repr(float(p["estimate"])),
                        "" if p.get("std") is None else repr(float(p["std"]))])


# -- sections ----------------------------------------------------------------------------


def _subgroup_report_section(doc, name, out, lines, insights):
    lines += [f"## Subgroup estimates ({name})", "", f"Metric: {doc.get('metric', 'accuracy')}", "",
              "| subgroup | source | estimate | interval | rows |", "|---|---|---|---|---|"]
    for src, ests in sorted(doc.get("estimates", {}).items()):
        for e in ests:
            iv = f"[{_fmt(e['low'])}, {_fmt(e['high'])}]" if e.get("low") is not None else ""
            lines.append(f"| {e['subgroup']} | {src} | {_fmt(e['value'])} | {iv} | {e['n_eval']} |")
    lines.append("")
    for src, md in sorted(doc.get("matrices", {}).items()):
        m = IntersectionalMatrix.from_dict(md)
        lines += [f"### Intersectional matrix ({src})", "", *matrix_markdown(m), ""]
        write_matrix_csv(m, out / "matrices" / f"{name}_{src}.csv")
        insights.append(_insight_cell(m, f"{name} {src} matrix"))
    fair = doc.get("fairness") or {}
    if fair:
        lines += ["### Fairness ratios", "", "| source | metric | ratio |", "|---|---|---|"]
        for src, vals in sorted(fair.items()):
            for k, v in sorted(vals.items()):
                lines.append(f"| {src} | {k} | {_fmt(v)} |")
        lines.append("")


def _subgroup_aggregate_section(doc, lines, insights):
    lines += ["## Subgroup oracle comparison", "",
              "| subgroup | test rows (mean) | real MAE | 3S MAE | 3S+ MAE | bootstrap MAE | real worst | 3S worst |",
              "|---|---|---|---|---|---|---|---|"]
    for name, e in doc["per_subgroup"].items():
        lines.append(f"| {name} | {_fmt(e['n_test_mean'], 1)} | {_fmt(e['real']['mae'])} | {_fmt(e['3S']['mae'])} | "
                     f"{_fmt(e['3S+']['mae'])} | {_fmt(e['bootstrap']['mae'])} | {_fmt(e['real']['worst'])} | "
                     f"{_fmt(e['3S']['worst'])} |")
    s = doc["small"]
    lines += ["", f"Subgroups under {doc['small_n']} test rows: {', '.join(s['subgroups']) or 'none'}; "
              f"real MAE {_fmt(s['real_mae'])}, 3S MAE {_fmt(s['3S_mae'])}, "
              f"reduction {_fmt(s['reduction'])}, 3S win rate {_fmt(s['win_rate'])} over {s['pairs']} pairs.", ""]
    if doc.get("coverage"):
        lines += ["| interval | coverage | width | cases |", "|---|---|---|---|"]
        for src, c in doc["coverage"].items():
            lines.append(f"| {src} | {_fmt(c['coverage'])} | {_fmt(c['width'])} | {c['cases']} |")
        lines.append("")
    worst = max(doc["per_subgroup"].items(), key=lambda kv: kv[1]["3S"]["mae"] or 0.0)
    insights.append(f"- Largest 3S oracle error: {worst[0]} (MAE {_fmt(worst[1]['3S']['mae'])}).")


def _intersectional_sections(seed_docs, agg_docs, out, lines, insights):
    for doc in agg_docs:
        lines += ["## Intersectional oracle comparison", "",
                  "| model | real MAE | 3S MAE | real cells | 3S cells |", "|---|---|---|---|---|"]
        for k, v in doc["per_model"].items():
            lines.append(f"| {k} | {_fmt(v['mae_real'])} | {_fmt(v['mae_3S'])} | {_fmt(v['cells_real'], 1)} | "
                         f"{_fmt(v['cells_3S'], 1)} |")
        lines.append("")
    if seed_docs:
        doc = min(seed_docs, key=lambda d: d["seed"])
        for model, rec in doc["models"].items():
            for src in ("3S", "real", "oracle"):
                m = IntersectionalMatrix.from_dict(rec[src])
                write_matrix_csv(m, out / "matrices" / f"seed{doc['seed']:03d}_{model}_{src}.csv")
            m = IntersectionalMatrix.from_dict(rec["3S"])
            lines += [f"### {model}: 3S matrix, seed {doc['seed']}", "", *matrix_markdown(m), ""]
            insights.append(_insight_cell(m, f"{model} (seed {doc['seed']})"))


def _curve_sections(curves, out, lines, insights):
    if not curves:
        return
    lines += ["## Sensitivity curves", "", "| curve | points | steepest segment | slope |", "|---|---|---|---|"]
    steep_all = []
    for name, feature, metric, points in curves:
        write_curve_rows(out / "curves" / f"{name}.csv", feature, metric, points)
        st = steepest_segment(points)
        seg = "NA" if st is None else f"{_fmt(st[0], 2)} to {_fmt(st[1], 2)}"
        lines.append(f"| {name} | {len(points)} | {seg} | {_fmt(None if st is None else st[2], 5)} |")
        if st is not None:
            steep_all.append((abs(st[2]), name, feature, st))
    lines.append("")
    if steep_all:
        _, name, feature, st = max(steep_all, key=lambda t: t[0])
        insights.append(f"- Steepest curve: {name} ({feature}) changes by {_fmt(st[2], 5)} per unit "
                        f"between s={_fmt(st[0], 2)} and s={_fmt(st[1], 2)}.")


def _shift_aggregate_section(doc, lines):
    lines += [f"## Shift buckets ({doc['feature']})", "", "| method | Mean | - | ± | + |", "|---|---|---|---|---|"]
    for m, row in doc["buckets"].items():
        lines.append("| " + " | ".join([m, *[_fmt(row[c]) for c in ("Mean", *BUCKETS)]]) + " |")
    lines.append("")


def _prior_sections(aggs, estimates, lines):
    for doc in aggs:
        feats = doc["features"]
        lines += ["## Prior knowledge: target-domain error", "",
                  "| observed features | 3S error | Source-RS error |", "|---|---|---|"]
        for k, (a, b) in enumerate(zip(doc["3S_error_by_k"], doc["RS_error_by_k"]), start=1):
            lines.append(f"| {', '.join(feats[:k])} | {_fmt(a)} | {_fmt(b)} |")
        lines += ["", "| baseline | error |", "|---|---|"]
        for b, v in doc["baselines"].items():
            lines.append(f"| {b} | {_fmt(v)} |")
        lines.append("")
    for name, doc in estimates:
        lines += [f"## Prior-knowledge estimate ({name})", "",
                  f"Observed features: {', '.join(doc['features'])}; estimated {doc['metric']}: "
                  f"{_fmt(doc['estimate'])}", ""]


def emit_model_report(results_dir, out) -> Path:
    """Write ``report.md`` plus matrix and curve CSVs under ``out``; returns the report path."""
    docs = collect_results(results_dir)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    root = Path(results_dir)
    lines = ["# Model report", "", f"Source: {len(docs)} result files.", ""]
    insights: list[str] = []
    by_kind: dict[str, list] = {}
    for path, doc in docs:
        name = "_".join(path.relative_to(root).with_suffix("").parts)
        by_kind.setdefault(doc["kind"], []).append((name, doc))
    for name, doc in by_kind.get("subgroup_report", []):
        _subgroup_report_section(doc, name, out, lines, insights)
    for _, doc in by_kind.get("subgroup_aggregate", []):
        _subgroup_aggregate_section(doc, lines, insights)
    _intersectional_sections([d for _, d in by_kind.get("intersectional_seed", [])],
                             [d for _, d in by_kind.get("intersectional_aggregate", [])], out, lines, insights)
    curves = []
    for name, doc in by_kind.get("shift_sweep", []):
        curves.append((name, doc["feature"], doc["metric"], doc["points"]))
    for name, doc in by_kind.get("shift_seed", []):
        pts = [{"s": p["s"], "bucket": p["bucket"], "estimate": p["3S"], "std": p.get("3S_std")}
               for p in doc["points"]]
        curves.append((name, doc["feature"], doc["metric"], pts))
    _curve_sections(curves, out, lines, insights)
    for _, doc in by_kind.get("shift_aggregate", []):
        _shift_aggregate_section(doc, lines)
    _prior_sections([d for _, d in by_kind.get("prior_aggregate", [])], by_kind.get("prior_estimate", []), lines)
    if insights:
        lines += ["## Insights", "", *insights, ""]
    path = out / "report.md"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
