"""Structured report files (versioned JSON), flat CSV exports and text tables.

Every JSON document carries ``"format": "fairdream.report/1"`` and a
``"kind"`` naming its payload (``audit``, ``correction``, ``gridsearch``,
``benchmark``). Key names are stable within a format version. CSV files have
a header row and use ``repr``-exact floats; undefined values are empty cells.
"""

from __future__ import annotations

import csv
import io
import json
import math
import shutil
from pathlib import Path
from typing import Iterable, Sequence

from .audit import Alert, AuditResult
from .benchmark import GAP_METRICS, BenchmarkCell, BenchmarkResult, MaxGapTable
from .gridsearch import GridSearchResult
from .metrics import CalibrationCurve, FairnessGaps, GroupReport, summarize_gaps
from .reweighting import CorrectionResult

REPORT_FORMAT = "fairdream.report/1"
FORMATS = ("text", "csv")


def _clean(obj):
    if isinstance(obj, float):
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def document(kind: str, payload: dict) -> dict:
    return {"format": REPORT_FORMAT, "kind": kind, **_clean(payload)}


def write_json(path: Path, doc: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: not a {REPORT_FORMAT} document")
    return doc


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    return path


def slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in text).strip("_")


# --- payload builders --------------------------------------------------------

def group_report_rows(report: GroupReport):
    header = ["group", "size", "tp", "fp", "tn", "fn", "base_rate", "opr", "tpr", "fpr", "precision"]
    rows = [[g[k] for k in header] for g in report.to_dict()["groups"]]
    return header, rows


def calibration_rows(curves: Sequence[CalibrationCurve]):
    header = ["group", "bin_center", "positive_rate", "count"]
    rows = []
    for c in curves:
        for x, r, n in zip(c.centers, c.rates, c.counts):
            rows.append([c.label, float(x), float(r), int(n)])
    return header, rows


def audit_payload(result: AuditResult) -> dict:
    return {
        "threshold": result.threshold,
        "alerts": [a.to_dict() for a in result.alerts],
        "reports": {f: r.to_dict() for f, r in result.reports.items()},
        "gaps": {f: summarize_gaps(r).to_dict() for f, r in result.reports.items()},
    }


def correction_payload(result: CorrectionResult) -> dict:
    return {
        "method": "fairdream",
        "feature": result.feature,
        "objective": result.objective,
        "alpha": result.alpha,
        "groups": result.partition.labels(),
        "baseline_gap_fair_scores": list(result.gaps),
        "candidates": result.table(),
        "schedules": [c.schedule.to_dict() for c in result.candidates],
        "baseline": {"report": result.baseline.report.to_dict(), "gaps": result.baseline.gaps.to_dict()},
        "selected": {
            "n": result.best.n,
            "report": result.best.report.to_dict(),
            "gaps": result.best.gaps.to_dict(),
        },
    }


def gridsearch_payload(result: GridSearchResult) -> dict:
    points = []
    for p, row in zip(result.points, result.table()):
        row = dict(row)
        row["groups"] = p.report.to_dict()["groups"]
        points.append(row)
    return {
        "method": "gridsearch",
        "feature": result.feature,
        "eta": result.eta,
        "constraint_satisfied": result.satisfied,
        "groups": result.partition.labels(),
        "points": points,
        "selected": {"lambda": result.best.mu, "target_group": result.best.target_group,
                     "report": result.best.report.to_dict(),
                     "gaps": summarize_gaps(result.best.report).to_dict()},
    }


def gridsearch_rows(result: GridSearchResult):
    labels = result.partition.labels()
    header = ["lambda", "target_group", "violation", "stat_score", "threshold", "selected"]
    for lab in labels:
        header += [f"opr[{lab}]", f"tpr[{lab}]", f"fpr[{lab}]"]
    rows = []
    for p in result.points:
        row = [p.mu, labels[p.target_group], p.violation, p.stat_score, p.threshold, p is result.best]
        for g in p.report.groups:
            row += [g.opr, g.tpr, g.fpr]
        rows.append(row)
    return header, rows


def candidate_rows(result: CorrectionResult):
    labels = result.partition.labels()
    header = ["n", "role", "selected", "stat_score", "fair_score", "trade_off_score", "threshold", "degenerate"]
    header += [f"weight[{lab}]" for lab in labels]
    rows = []
    for row in result.table():
        weights = row["group_weights"] or [None] * len(labels)
        rows.append([row["n"], row["role"], row["selected"], row["stat_score"], row["fair_score"],
                     row["trade_off_score"], row["threshold"], row["degenerate"], *weights])
    return header, rows


def benchmark_payload(result: BenchmarkResult) -> dict:
    cfg = dict(result.config.__dict__)
    cfg["bins"] = {k: list(v) for k, v in cfg["bins"].items()}
    return {
        "config": cfg,
        "n_corrections": len({c.key for c in result.cells}),
        "skipped": result.skipped,
        "mean_roc_auc": {m: result.mean_roc_auc(m) for m in ("baseline", "fairdream", "gridsearch")},
        "cells": [c.to_dict() for c in result.cells],
        "max_gap_tables": {
            "baseline_vs_fairdream": result.baseline_vs_fairdream.to_dict(),
            "gridsearch_vs_fairdream": result.gridsearch_vs_fairdream.to_dict(),
        },
    }


def cell_rows(cell: BenchmarkCell):
    header = ["group", *[m for m in GAP_METRICS if m != "calibration"], "calibration_diagonal_distance"]
    rows = []
    for k, label in enumerate(cell.groups):
        row = [label] + [cell.values[m][k] for m in GAP_METRICS if m != "calibration"]
        rows.append(row + [cell.curves[k].diagonal_distance()])
    rows.append(["(gap)"] + [cell.gaps[m] for m in GAP_METRICS if m != "calibration"] + [cell.gaps["calibration"]])
    return header, rows


def grouped_bar_rows(cells: Sequence[BenchmarkCell]):
    """Long-format rows for per-group bar charts of OPR / TPR / FPR by method."""
    header = ["family", "feature", "method", "group", "metric", "value"]
    rows = []
    for c in cells:
        for metric in ("opr", "tpr", "fpr"):
            for label, v in zip(c.groups, c.values[metric]):
                rows.append([c.family, c.feature, c.method, label, metric, v])
    return header, rows


def max_gap_rows(table: MaxGapTable):
    header = ["method", *GAP_METRICS, "all"]
    totals = table.totals()
    return header, [[m, *[table.counts[m][k] for k in GAP_METRICS], totals[m]] for m in table.methods]


# --- output directories ------------------------------------------------------

_OWNED = ("summary.json", "report.txt", "cells", "calibration", "figures", "tables")


def prepare_dir(out_dir: str | Path) -> Path:
    """Create ``out_dir`` and remove outputs a previous run left there."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in _OWNED:
        p = out / name
        if p.is_dir():
            shutil.rmtree(p)
        elif p.exists():
            p.unlink()
    return out


def emit_report(result: BenchmarkResult, out_dir: str | Path, formats: Sequence[str] = FORMATS) -> list[Path]:
    """Write the benchmark summary and per-cell exports; rewrites the directory idempotently."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    out = prepare_dir(out_dir)
    written = [write_json(out / "summary.json", document("benchmark", benchmark_payload(result)))]
    if "text" in formats:
        (out / "report.txt").write_text(render_benchmark(result), encoding="utf-8")
        written.append(out / "report.txt")
    if "csv" in formats:
        for cell in result.cells:
            stem = slug(f"{cell.family}__{cell.feature}__{cell.method}")
            written.append(write_csv(out / "cells" / f"{stem}.csv", *cell_rows(cell)))
            written.append(write_csv(out / "calibration" / f"{stem}.csv", *calibration_rows(cell.curves)))
        written.append(write_csv(out / "figures" / "grouped_rates.csv", *grouped_bar_rows(result.cells)))
        for name, table in (("baseline_vs_fairdream", result.baseline_vs_fairdream),
                            ("gridsearch_vs_fairdream", result.gridsearch_vs_fairdream)):
            written.append(write_csv(out / "tables" / f"{name}.csv", *max_gap_rows(table)))
    return written


# --- text rendering ----------------------------------------------------------

def _fmt(v, pct=False) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{100 * v:.1f}%" if pct else f"{v:.3f}"
    return str(v)


def text_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(header)]
    line = "  ".join(str(h).ljust(w) for h, w in zip(header, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def render_alerts(alerts: Sequence[Alert], threshold: float | None = None) -> str:
    if not alerts:
        return "no alerts: every group's positive rate is within the configured ratio"
    rows = [[a.feature, a.disadvantaged, _fmt(a.opr_disadvantaged, True), a.advantaged,
             _fmt(a.opr_advantaged, True), "inf" if a.infinite else f"{a.ratio:.2f}",
             f"{a.size_disadvantaged}/{a.size_advantaged}"] for a in alerts]
    head = ["feature", "disadvantaged", "opr", "advantaged", "opr", "ratio", "sizes"]
    pre = f"decision threshold {threshold:.4f}\n" if threshold is not None else ""
    return pre + text_table(head, rows)


def render_group_report(report: GroupReport) -> str:
    rows = [[g.label, g.size, _fmt(g.base_rate, True), _fmt(g.opr, True), _fmt(g.tpr, True), _fmt(g.fpr, True),
             _fmt(g.precision, True)] for g in report.groups]
    return text_table(["group", "size", "base rate", "OPR", "TPR", "FPR", "precision"], rows)


def render_gaps(g: FairnessGaps) -> str:
    ratio = "inf" if g.ratio is not None and math.isinf(g.ratio) else _fmt(g.ratio)
    return (f"OPR gap {_fmt(g.dp_gap)} (ratio {ratio}), TPR gap {_fmt(g.tpr_gap)}, "
            f"FPR gap {_fmt(g.fpr_gap)}")


def render_correction(result: CorrectionResult) -> str:
    header, rows = candidate_rows(result)
    rows = [[_fmt(v) if isinstance(v, float) else ("*" if v is True else ("" if v is False else str(v)))
             for v in r] for r in rows]
    parts = [
        f"reweighting on {result.feature!r} ({result.objective}, alpha={result.alpha:.3f})",
        text_table(header, rows),
        "",
        "baseline:",
        render_group_report(result.baseline.report),
        render_gaps(result.baseline.gaps),
        "",
        f"selected candidate #{result.best.n}:",
        render_group_report(result.best.report),
        render_gaps(result.best.gaps),
    ]
    return "\n".join(parts)


def render_gridsearch(result: GridSearchResult) -> str:
    labels = result.partition.labels()
    rows = []
    for p in result.points:
        oprs = " / ".join(_fmt(g.opr, True) for g in p.report.groups)
        rows.append([f"{p.mu:+.3f}", labels[p.target_group], _fmt(p.violation), _fmt(p.stat_score), oprs,
                     "*" if p is result.best else ""])
    status = "satisfied" if result.satisfied else "not satisfied by any point"
    return "\n".join([
        f"grid search on {result.feature!r}: eta={result.eta} ({status})",
        text_table(["lambda", "target", "DP gap", "ROC-AUC", "OPR by group", "sel"], rows),
        "",
        "selected point:",
        render_group_report(result.best.report),
        render_gaps(summarize_gaps(result.best.report)),
    ])


def render_max_gap(table: MaxGapTable) -> str:
    header, rows = max_gap_rows(table)
    return text_table(header, [[str(v) for v in r] for r in rows])


def render_benchmark(result: BenchmarkResult) -> str:
    n = len({c.key for c in result.cells})
    lines = [f"corrections: {n}" if n else "corrections: 0 (no corrections: no feature tripped an alert)"]
    for m in ("baseline", "fairdream", "gridsearch"):
        lines.append(f"mean ROC-AUC {m}: {_fmt(result.mean_roc_auc(m))}")
    lines += ["", "max gap: baseline vs fairdream", render_max_gap(result.baseline_vs_fairdream),
              "", "max gap: gridsearch vs fairdream", render_max_gap(result.gridsearch_vs_fairdream)]
    if result.skipped:
        lines += ["", "skipped (no alert): " + ", ".join(f"{s['family']}/{s['feature']}" for s in result.skipped)]
    return "\n".join(lines) + "\n"


def render_document(doc: dict) -> str:
    """Human-readable rendering of a saved report document."""
    kind = doc.get("kind")
    if kind == "audit":
        alerts = doc["alerts"]
        if not alerts:
            return "no alerts"
        rows = [[a["feature"], a["disadvantaged_group"], _fmt(a["opr_disadvantaged"], True), a["advantaged_group"],
                 _fmt(a["opr_advantaged"], True), "inf" if a["ratio_infinite"] else f"{a['ratio']:.2f}"]
                for a in alerts]
        return text_table(["feature", "disadvantaged", "opr", "advantaged", "opr", "ratio"], rows)
    if kind == "benchmark":
        out = [f"corrections: {doc['n_corrections']}"]
        out += [f"mean ROC-AUC {m}: {_fmt(v)}" for m, v in doc["mean_roc_auc"].items()]
        for name, t in doc["max_gap_tables"].items():
            rows = [[m, *[str(t["counts"][m][k]) for k in GAP_METRICS], str(t["totals"][m])] for m in t["methods"]]
            out += ["", name, text_table(["method", *GAP_METRICS, "all"], rows)]
        return "\n".join(out)
    if kind in ("correction", "gridsearch"):
        sel = doc["selected"]
        rows = [[g["group"], g["size"], _fmt(g["opr"], True), _fmt(g["tpr"], True), _fmt(g["fpr"], True)]
                for g in sel["report"]["groups"]]
        return f"{doc['method']} on {doc['feature']!r}\n" + text_table(["group", "size", "OPR", "TPR", "FPR"], rows)
    raise ValueError(f"unknown report kind {kind!r}")
