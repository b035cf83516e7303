import json

import numpy as np
import pytest

from fairdream import metrics
from fairdream import report as rpt
from fairdream.benchmark import (GAP_METRICS, BenchmarkCell, BenchmarkConfig, calibration_spread, max_gap_table,
                                 run_benchmark)

SMALL = BenchmarkConfig(families=("logistic",), features=("sex", "age"), subsample_rows=2000,
                        gbdt_estimators=20, n_candidates=2, grid_size=3)


@pytest.fixture(scope="module")
def result(census):
    return run_benchmark(census, config=SMALL)


def cell(method, gaps, family="gbdt", feature="sex"):
    return BenchmarkCell(family, feature, method, ("a", "b"), {}, gaps, (), 0.5, 0.8)


def full(v):
    return dict.fromkeys(GAP_METRICS, v)


def test_strict_max_rule():
    cells = [cell("gridsearch", full(0.3)), cell("fairdream", {**full(0.3), "tpr": 0.5, "opr": 0.1}),
             cell("gridsearch", full(0.2), feature="age"), cell("fairdream", {**full(0.1), "fpr": None},
                                                                 feature="age")]
    t = max_gap_table(cells, "gridsearch", "fairdream")
    assert t.n_cells == 2
    assert t.counts["fairdream"]["tpr"] == 1
    assert t.counts["gridsearch"]["opr"] == 2
    assert t.counts["gridsearch"]["fpr"] == 0  # tie on sex, undefined on age
    assert t.counts["gridsearch"]["roc_auc"] == 1 and t.counts["fairdream"]["roc_auc"] == 0
    assert t.totals() == {m: sum(t.counts[m].values()) for m in t.methods}
    for metric in GAP_METRICS:
        assert t.counts["gridsearch"][metric] + t.counts["fairdream"][metric] <= t.n_cells


def test_no_alert_means_no_cells(census):
    cfg = BenchmarkConfig(families=("logistic",), features=("sex",), subsample_rows=1000, ratio_threshold=1e6)
    res = run_benchmark(census, config=cfg)
    assert res.cells == []
    assert res.skipped == [{"family": "logistic", "feature": "sex", "reason": "no alert"}]
    assert res.gridsearch_vs_fairdream.totals() == {"gridsearch": 0, "fairdream": 0}


def test_cells_complete(result):
    keys = {c.key for c in result.cells}
    skipped = {(s["family"], s["feature"]) for s in result.skipped}
    assert keys | skipped == {("logistic", "sex"), ("logistic", "age")}
    for c in result.cells:
        assert set(c.gaps) == set(GAP_METRICS)
        assert all(g is None or g >= 0 for g in c.gaps.values())


def test_gaps_recomputable(result):
    for c in result.cells:
        for m in GAP_METRICS:
            if m == "calibration":
                expected = calibration_spread(c.curves)
            else:
                expected = metrics.spread(c.values[m])
            if expected is None:
                assert c.gaps[m] is None
            else:
                assert c.gaps[m] == pytest.approx(expected, abs=1e-12)


def test_calibration_spread():
    a = metrics.CalibrationCurve(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([1, 1]), 10)
    b = metrics.CalibrationCurve(np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.array([1, 1]), 10)
    c = metrics.CalibrationCurve(np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.array([1, 1]), 10)
    assert calibration_spread([a, b, c]) == pytest.approx(0.5)
    assert calibration_spread([a]) is None


def test_emit_report_idempotent(result, tmp_path):
    out = tmp_path / "bench"
    (out / "cells").mkdir(parents=True)
    (out / "cells" / "stale.csv").write_text("old")
    first = rpt.emit_report(result, out)
    assert not (out / "cells" / "stale.csv").exists()
    bodies = {p: p.read_bytes() for p in first}
    second = rpt.emit_report(result, out)
    assert sorted(first) == sorted(second)
    assert all(p.read_bytes() == bodies[p] for p in second)
    doc = json.loads((out / "summary.json").read_text())
    assert doc["format"] == rpt.REPORT_FORMAT and doc["kind"] == "benchmark"
    assert set(doc["max_gap_tables"]) == {"baseline_vs_fairdream", "gridsearch_vs_fairdream"}
    for c in result.cells:
        assert (out / "cells" / f"{rpt.slug(f'{c.family}__{c.feature}__{c.method}')}.csv").exists()
    assert "fairdream" in rpt.render_document(doc)


def test_rerun_is_byte_identical(census, result, tmp_path):
    again = run_benchmark(census, config=SMALL)
    a = rpt.emit_report(result, tmp_path / "a", ["csv"])
    b = rpt.emit_report(again, tmp_path / "b", ["csv"])
    for pa, pb in zip(sorted(a), sorted(b)):
        if pa.suffix == ".csv":
            assert pa.read_bytes() == pb.read_bytes()


def test_empty_summary(tmp_path, census):
    cfg = BenchmarkConfig(families=("logistic",), features=("sex",), subsample_rows=1000, ratio_threshold=1e6)
    res = run_benchmark(census, config=cfg)
    rpt.emit_report(res, tmp_path)
    doc = rpt.read_json(tmp_path / "summary.json")
    assert doc["n_corrections"] == 0
    assert "no corrections" in (tmp_path / "report.txt").read_text().lower()


def test_full_scale_config():
    cfg = BenchmarkConfig.full_scale()
    assert cfg.subsample_rows is None and cfg.learner("gbdt").n_estimators == 1000
    assert BenchmarkConfig().learner("gbdt").n_estimators == 200
    assert BenchmarkConfig().n_candidates == 10 and BenchmarkConfig().grid_size == 10
