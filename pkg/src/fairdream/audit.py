"""Discrimination alerts: flag groups whose positive rate trails the best-off group."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .dataset import DEFAULT_MIN_GROUP_SIZE, DEFAULT_QUANTILE_BINS, DataTable, GroupPartition, bin_feature
from .learners import classify
from .pipeline import Pipeline


@dataclass(frozen=True)
class AuditConfig:
    features: Sequence[str] | None = None
    ratio_threshold: float = 3.0
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE
    threshold: float | None = None  # None: F1-maximizing threshold on the audited table
    bins: Mapping[str, Sequence[float]] = field(default_factory=dict)
    quantiles: int = DEFAULT_QUANTILE_BINS

    def __post_init__(self):
        if not self.ratio_threshold > 1:
            raise ValueError("ratio_threshold must be > 1")
        if self.min_group_size < 1:
            raise ValueError("min_group_size must be >= 1")


@dataclass(frozen=True)
class Alert:
    feature: str
    disadvantaged: str
    advantaged: str
    opr_disadvantaged: float
    opr_advantaged: float
    ratio: float
    size_disadvantaged: int
    size_advantaged: int
    trigger: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.ratio)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "disadvantaged_group": self.disadvantaged,
            "advantaged_group": self.advantaged,
            "opr_disadvantaged": self.opr_disadvantaged,
            "opr_advantaged": self.opr_advantaged,
            "ratio": None if self.infinite else self.ratio,
            "ratio_infinite": self.infinite,
            "size_disadvantaged": self.size_disadvantaged,
            "size_advantaged": self.size_advantaged,
            "ratio_threshold": self.trigger,
        }


@dataclass(frozen=True)
class AuditResult:
    alerts: list[Alert]
    reports: dict[str, metrics.GroupReport]
    partitions: dict[str, GroupPartition]
    threshold: float

    def alerted_features(self) -> list[str]:
        seen = []
        for a in self.alerts:
            if a.feature not in seen:
                seen.append(a.feature)
        return seen


def partition_for(table: DataTable, feature: str, config: AuditConfig) -> GroupPartition:
    """Default grouping of one feature: explicit bins if declared, else quantiles or categories."""
    if feature in config.bins:
        return bin_feature(table, feature, "edges", edges=config.bins[feature])
    return bin_feature(table, feature, k=config.quantiles, min_group_size=config.min_group_size)


def alerts_from_report(report: metrics.GroupReport, ratio_threshold: float, min_group_size: int) -> list[Alert]:
    eligible = [g for g in report.groups if g.size >= min_group_size and g.opr is not None]
    if len(eligible) < 2:
        return []
    top = max(eligible, key=lambda g: g.opr)
    if top.opr == 0:
        return []
    alerts = []
    for g in eligible:
        if g is top:
            continue
        ratio = math.inf if g.opr == 0 else top.opr / g.opr
        if ratio >= ratio_threshold:
            alerts.append(Alert(report.feature, g.label, top.label, g.opr, top.opr, ratio,
                                g.size, top.size, ratio_threshold))
    return alerts


def run_audit(model: Pipeline, table: DataTable, config: AuditConfig = AuditConfig(),
              scores: np.ndarray | None = None) -> AuditResult:
    """Score ``table`` once and scan every configured feature for alerts."""
    if scores is None:
        scores = model.scores(table)
    threshold = config.threshold
    if threshold is None:
        threshold, _ = metrics.best_f1_threshold(table.target, scores)
    yhat = classify(scores, threshold)
    features = list(config.features) if config.features is not None else table.names
    alerts, reports, partitions = [], {}, {}
    for feature in features:
        part = partition_for(table, feature, config)
        report = metrics.group_report(table.target, yhat, part)
        partitions[feature] = part
        reports[feature] = report
        alerts.extend(alerts_from_report(report, config.ratio_threshold, config.min_group_size))
    alerts.sort(key=lambda a: (-a.ratio, a.feature, a.disadvantaged))
    return AuditResult(alerts, reports, partitions, float(threshold))


def detect_alerts(model: Pipeline, table: DataTable, config: AuditConfig = AuditConfig()) -> list[Alert]:
    """Alerts sorted by descending ratio; zero-OPR groups carry an infinite ratio."""
    return run_audit(model, table, config).alerts
