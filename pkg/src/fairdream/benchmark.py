"""Baseline vs reweighting vs grid search across learner families and features."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .audit import AuditConfig, run_audit
from .dataset import DataTable, GroupPartition, split, subsample
from .gridsearch import DEFAULT_BOUND, DEFAULT_ETA, run_gridsearch
from .learners import LearnerConfig, classify
from .pipeline import Pipeline, fit_pipeline
from .reweighting import DEFAULT_ALPHA, run_fairdream

log = logging.getLogger(__name__)

METHODS = ("baseline", "fairdream", "gridsearch")
GAP_METRICS = ("opr", "fpr", "tpr", "roc_auc", "pr_auc", "calibration")
DEFAULT_FEATURES = ("age", "sex", "race", "marital-status", "relationship", "occupation", "native-country")
AGE_EDGES = (17.0, 29.0, 37.0, 46.0, 56.0, 91.0)


@dataclass(frozen=True)
class BenchmarkConfig:
    families: Sequence[str] = ("gbdt", "random_forest", "logistic")
    features: Sequence[str] = DEFAULT_FEATURES
    subsample_rows: int | None = 10_000
    test_fraction: float = 0.3
    seed: int = 0
    gbdt_estimators: int | None = 200  # None: the full 1000-tree setting
    n_candidates: int = 10
    grid_size: int = 10
    lambda_bound: float = DEFAULT_BOUND
    eta: float = DEFAULT_ETA
    alpha: float = DEFAULT_ALPHA
    ratio_threshold: float = 3.0
    min_group_size: int = 50
    bins: Mapping[str, Sequence[float]] = field(default_factory=lambda: {"age": AGE_EDGES})
    calibration_bins: int = 10

    @classmethod
    def full_scale(cls, **overrides) -> "BenchmarkConfig":
        return cls(**{"subsample_rows": None, "gbdt_estimators": None, **overrides})

    def learner(self, family: str) -> LearnerConfig:
        if family == "gbdt":
            return LearnerConfig(family="gbdt", n_estimators=self.gbdt_estimators, seed=self.seed)
        return LearnerConfig(family=family, seed=self.seed)

    def audit_config(self) -> AuditConfig:
        return AuditConfig(features=tuple(self.features), ratio_threshold=self.ratio_threshold,
                           min_group_size=self.min_group_size, bins=dict(self.bins))


@dataclass(frozen=True, eq=False)
class BenchmarkCell:
    family: str
    feature: str
    method: str
    groups: tuple[str, ...]
    values: dict  # metric -> per-group list (None where undefined)
    gaps: dict  # metric -> float or None
    curves: tuple[metrics.CalibrationCurve, ...]
    threshold: float
    roc_auc: float

    @property
    def key(self) -> tuple[str, str]:
        return self.family, self.feature

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "feature": self.feature,
            "method": self.method,
            "threshold": self.threshold,
            "roc_auc": self.roc_auc,
            "groups": list(self.groups),
            "values": {k: list(v) for k, v in self.values.items()},
            "gaps": dict(self.gaps),
        }


def _safe(fn, *args):
    try:
        return fn(*args)
    except metrics.UndefinedMetric:
        return None


def calibration_spread(curves: Sequence[metrics.CalibrationCurve]) -> float | None:
    """Largest pairwise area between group calibration curves."""
    usable = [c for c in curves if len(c) >= 2]
    areas = []
    for a, b in itertools.combinations(usable, 2):
        try:
            areas.append(metrics.calibration_gap_area(a, b))
        except ValueError:
            continue
    return max(areas) if areas else None


def evaluate_cell(family: str, feature: str, method: str, pipeline: Pipeline, table: DataTable,
                  partition: GroupPartition, threshold: float | None = None,
                  calibration_bins: int = 10) -> BenchmarkCell:
    y = table.target
    scores = pipeline.scores(table)
    if threshold is None:
        threshold, _ = metrics.best_f1_threshold(y, scores)
    report = metrics.group_report(y, classify(scores, threshold), partition)
    values = {r: report.values(r) for r in ("opr", "fpr", "tpr")}
    values["roc_auc"], values["pr_auc"] = [], []
    curves = []
    for label, m in zip(partition.labels(), partition.masks()):
        values["roc_auc"].append(_safe(metrics.roc_auc, y[m], scores[m]))
        values["pr_auc"].append(_safe(metrics.pr_auc, y[m], scores[m]))
        curves.append(metrics.calibration_curve(y[m], scores[m], calibration_bins, label=label))
    gaps = {k: metrics.spread(v) for k, v in values.items()}
    gaps["calibration"] = calibration_spread(curves)
    return BenchmarkCell(family, feature, method, tuple(partition.labels()), values, gaps, tuple(curves),
                         float(threshold), metrics.roc_auc(y, scores))


@dataclass(frozen=True)
class MaxGapTable:
    """Per method and metric: cells where that method has the strictly larger gap."""

    methods: tuple[str, str]
    counts: dict  # method -> metric -> int
    n_cells: int

    def totals(self) -> dict:
        return {m: sum(self.counts[m].values()) for m in self.methods}

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "n_cells": self.n_cells,
            "counts": {m: {k: self.counts[m][k] for k in GAP_METRICS} for m in self.methods},
            "totals": self.totals(),
        }


def max_gap_table(cells: Sequence[BenchmarkCell], first: str, second: str) -> MaxGapTable:
    by_key = {}
    for c in cells:
        by_key.setdefault(c.key, {})[c.method] = c
    counts = {first: dict.fromkeys(GAP_METRICS, 0), second: dict.fromkeys(GAP_METRICS, 0)}
    n = 0
    for key in sorted(by_key):
        pair = by_key[key]
        if first not in pair or second not in pair:
            continue
        n += 1
        for metric in GAP_METRICS:
            a, b = pair[first].gaps[metric], pair[second].gaps[metric]
            if a is None or b is None or a == b:
                continue
            counts[first if a > b else second][metric] += 1
    return MaxGapTable((first, second), counts, n)


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    cells: list[BenchmarkCell]
    skipped: list[dict]
    baseline_vs_fairdream: MaxGapTable
    gridsearch_vs_fairdream: MaxGapTable
    config: BenchmarkConfig
    details: dict = field(default_factory=dict)

    def mean_roc_auc(self, method: str) -> float | None:
        vals = [c.roc_auc for c in self.cells if c.method == method]
        return float(np.mean(vals)) if vals else None


def run_benchmark(table: DataTable, families: Sequence[str] | None = None,
                  features: Sequence[str] | None = None,
                  config: BenchmarkConfig = BenchmarkConfig()) -> BenchmarkResult:
    """Correct every (family, feature) pair whose baseline trips a ratio alert.

    Both corrections use the demographic-parity objective; every method's
    selected model is then evaluated on the held-out split.
    """
    families = tuple(families or config.families)
    features = tuple(features or config.features)
    if features != tuple(config.features):
        config = BenchmarkConfig(**{**config.__dict__, "features": features})
    if config.subsample_rows:
        table = subsample(table, config.subsample_rows, config.seed)
    train, test = split(table, config.test_fraction, config.seed)
    audit_cfg = config.audit_config()

    cells, skipped, details = [], [], {}
    for family in families:
        learner = config.learner(family)
        base = fit_pipeline(train, learner)
        audit = run_audit(base, test, audit_cfg)
        alerted = set(audit.alerted_features())
        for feature in features:
            if feature not in alerted:
                skipped.append({"family": family, "feature": feature, "reason": "no alert"})
                continue
            part = audit.partitions[feature]
            log.info("correcting %s / %s", family, feature)
            fd = run_fairdream(base, train, test, feature, n_candidates=config.n_candidates,
                               alpha=config.alpha, config=learner, partition=part)
            gs = run_gridsearch(base, train, test, feature, grid_size=config.grid_size,
                                lambda_bound=config.lambda_bound, eta=config.eta, config=learner,
                                partition=part, ratio_threshold=config.ratio_threshold)
            for method, pipe, thr in (
                ("baseline", base, audit.threshold),
                ("fairdream", fd.best.pipeline, fd.best.threshold),
                ("gridsearch", gs.best.pipeline, gs.best.threshold),
            ):
                cells.append(evaluate_cell(family, feature, method, pipe, test, part, thr,
                                           config.calibration_bins))
            details[(family, feature)] = {"fairdream": fd, "gridsearch": gs}

    return BenchmarkResult(
        cells, skipped,
        max_gap_table(cells, "baseline", "fairdream"),
        max_gap_table(cells, "gridsearch", "fairdream"),
        config, details,
    )
