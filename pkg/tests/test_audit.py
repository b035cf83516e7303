import math

import numpy as np
import pytest

from conftest import make_partition
from fairdream.audit import AuditConfig, alerts_from_report, run_audit
from fairdream.dataset import ColumnSpec, DataTable
from fairdream.metrics import group_report


def table_with_groups(groups, positives, seed=0):
    """Categorical feature ``grp`` with fixed scores: ``positives[k]`` rows of group k score 0.9."""
    cats, scores = [], []
    for (name, size), pos in zip(groups, positives):
        cats += [name] * size
        scores += [0.9] * pos + [0.1] * (size - pos)
    n = len(cats)
    y = np.random.default_rng(seed).integers(0, 2, size=n).astype(np.int8)
    y[0] = 1
    t = DataTable((ColumnSpec("grp", "categorical"),), {"grp": np.array(cats, dtype=object)}, y)
    return t, np.array(scores)


def test_detects_disparity_and_sorts():
    t, s = table_with_groups([("a", 100), ("b", 100), ("c", 100)], [12, 66, 30])
    res = run_audit(None, t, AuditConfig(threshold=0.5), scores=s)
    assert [a.disadvantaged for a in res.alerts] == ["{a}"]
    a = res.alerts[0]
    assert a.advantaged == "{b}"
    assert a.opr_disadvantaged == pytest.approx(0.12) and a.opr_advantaged == pytest.approx(0.66)
    assert a.ratio == pytest.approx(5.5)
    res2 = run_audit(None, t, AuditConfig(threshold=0.5, ratio_threshold=2.0), scores=s)
    assert [x.disadvantaged for x in res2.alerts] == ["{a}", "{c}"]
    assert res2.alerts[0].ratio >= res2.alerts[1].ratio


def test_no_alert_for_equal_rates():
    t, s = table_with_groups([("a", 100), ("b", 100)], [40, 40])
    assert run_audit(None, t, AuditConfig(threshold=0.5), scores=s).alerts == []


def test_small_group_never_alerts():
    t, s = table_with_groups([("tiny", 10), ("b", 200), ("c", 200)], [0, 120, 120])
    res = run_audit(None, t, AuditConfig(threshold=0.5, min_group_size=50), scores=s)
    assert res.alerts == []
    assert all(g.size >= 50 for g in res.reports["grp"].groups)


def test_zero_opr_is_infinite():
    t, s = table_with_groups([("a", 100), ("b", 100)], [0, 50])
    (alert,) = run_audit(None, t, AuditConfig(threshold=0.5), scores=s).alerts
    assert alert.infinite and math.isinf(alert.ratio)
    assert alert.to_dict()["ratio"] is None and alert.to_dict()["ratio_infinite"]


def test_default_threshold_is_f1():
    t, s = table_with_groups([("a", 100), ("b", 100)], [10, 60])
    res = run_audit(None, t, AuditConfig(), scores=s)
    from fairdream.metrics import best_f1_threshold
    assert res.threshold == best_f1_threshold(t.target, s)[0]


def test_monotone_in_ratio_threshold():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        sizes = rng.integers(20, 120, size=k)
        assignment = np.repeat(np.arange(k), sizes)
        yhat = (rng.uniform(size=len(assignment)) < rng.uniform(0, 1, size=k)[assignment]).astype(int)
        y = rng.integers(0, 2, size=len(assignment))
        rep = group_report(y, yhat, make_partition(assignment))
        hi, lo = sorted(rng.uniform(1.01, 6, size=2), reverse=True)
        strict = {(a.disadvantaged, a.advantaged) for a in alerts_from_report(rep, hi, 50)}
        loose = {(a.disadvantaged, a.advantaged) for a in alerts_from_report(rep, lo, 50)}
        assert strict <= loose
        sizes_ok = {g.label for g in rep.groups if g.size >= 50}
        assert all(d in sizes_ok and a in sizes_ok for d, a in loose)


def test_deterministic():
    t, s = table_with_groups([("a", 100), ("b", 100), ("c", 80)], [5, 60, 20])
    a = run_audit(None, t, AuditConfig(threshold=0.5), scores=s)
    b = run_audit(None, t, AuditConfig(threshold=0.5), scores=s)
    assert [x.to_dict() for x in a.alerts] == [x.to_dict() for x in b.alerts]


def test_config_validation():
    with pytest.raises(ValueError):
        AuditConfig(ratio_threshold=1.0)
    with pytest.raises(ValueError):
        AuditConfig(min_group_size=0)
