"""Ascending group reweighting: candidate schedules, scoring and selection.

Each candidate ``n`` trains the learner with per-group error weights that grow
exponentially with ``n`` times the group's baseline fairness gap. Candidates
are ranked by ``alpha * ROC-AUC + (1 - alpha) * fair_score``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics
from .dataset import DataTable, GroupPartition
from .learners import LearnerConfig, classify
from .metrics import DEMOGRAPHIC_PARITY, GroupReport
from .pipeline import Pipeline, fit_pipeline

GAP_FLOOR = 0.05
DEFAULT_ALPHA = 1.0 / 3.0


@dataclass(frozen=True)
class FairObjective:
    tag: str = DEMOGRAPHIC_PARITY

    def __post_init__(self):
        if self.tag not in metrics.OBJECTIVES:
            raise ValueError(f"unknown fairness objective {self.tag!r}")

    def indicators(self, report: GroupReport) -> list:
        """OPR per group for demographic parity, (TPR, FPR) pairs for equalized odds."""
        if self.tag == DEMOGRAPHIC_PARITY:
            return report.values("opr")
        return list(zip(report.values("tpr"), report.values("fpr")))


def _as_objective(objective) -> FairObjective:
    return objective if isinstance(objective, FairObjective) else FairObjective(objective)


def gap_fair_scores(indicators: Sequence, objective=DEMOGRAPHIC_PARITY) -> list[float | None]:
    """Distance of each group's indicator from the best-off group.

    Demographic parity: ``max(opr) - opr_k``. Equalized odds: the mean of
    ``max(tpr) - tpr_k`` and ``fpr_k - min(fpr)``. Groups whose indicators
    are all undefined get ``None``.
    """
    obj = _as_objective(objective)
    if len(indicators) < 2:
        raise ValueError("need at least two groups")
    if obj.tag == DEMOGRAPHIC_PARITY:
        vals = [None if v is None else float(v) for v in indicators]
        defined = [v for v in vals if v is not None]
        if not defined:
            return [None] * len(vals)
        top = max(defined)
        return [None if v is None else abs(v - top) for v in vals]

    tprs = [t for t, _ in indicators if t is not None]
    fprs = [f for _, f in indicators if f is not None]
    best_tpr = max(tprs) if tprs else None
    best_fpr = min(fprs) if fprs else None
    gaps = []
    for t, f in indicators:
        parts = []
        if t is not None:
            parts.append(best_tpr - t)
        if f is not None:
            parts.append(f - best_fpr)
        gaps.append(float(np.mean(parts)) if parts else None)
    return gaps


@dataclass(frozen=True)
class WeightSchedule:
    n: int
    gaps: tuple[float, ...]
    shares: tuple[float, ...]
    rate_indivs_disadvantaged: tuple[float, ...]
    raw: tuple[float, ...]
    weights: tuple[float, ...]
    floor: float
    floored: tuple[bool, ...]
    undefined: tuple[bool, ...] = ()

    def row_weights(self, assignment: np.ndarray) -> np.ndarray:
        """Broadcast group weights to rows; rows outside every group get the smallest weight."""
        w = np.asarray(self.weights)
        out = np.full(len(assignment), w.min())
        known = assignment >= 0
        out[known] = w[assignment[known]]
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "gap_fair_scores": list(self.gaps),
            "shares": list(self.shares),
            "rate_indivs_disadvantaged": list(self.rate_indivs_disadvantaged),
            "raw_weights": list(self.raw),
            "weights": list(self.weights),
            "gap_floor": self.floor,
            "floored": list(self.floored),
            "undefined": list(self.undefined),
        }


def candidate_weights(n: int, gaps: Sequence[float | None], sizes: Sequence[int],
                      floor: float = GAP_FLOOR) -> WeightSchedule:
    """Group weights for candidate ``n``.

    ``raw_k = max(gap_k, floor) * |S_k| / N * exp(n * gap_k)``, then rescaled
    so the largest weight is 1. The floor keeps the best-off group (gap 0)
    in training. Undefined gaps count as 0.
    """
    if n < 1:
        raise ValueError("candidate index n must be >= 1")
    sizes = np.asarray(sizes, dtype=float)
    if len(sizes) != len(gaps):
        raise ValueError("gaps and sizes must have the same length")
    if (sizes <= 0).any():
        raise ValueError("group sizes must be positive")
    undefined = tuple(g is None for g in gaps)
    g = np.array([0.0 if v is None else float(v) for v in gaps])
    shares = sizes / sizes.sum()
    rate = np.maximum(g, floor) * shares
    raw = rate * np.exp(n * g)
    weights = raw / raw.max()
    return WeightSchedule(
        n, tuple(g.tolist()), tuple(shares.tolist()), tuple(rate.tolist()), tuple(raw.tolist()),
        tuple(weights.tolist()), floor, tuple((g < floor).tolist()), undefined,
    )


def fair_score_global(indicators: Sequence, sizes: Sequence[int], objective=DEMOGRAPHIC_PARITY) -> float:
    """``1 - sum_k share_k * gap_k`` clamped to [0, 1]; undefined groups are left out."""
    gaps = gap_fair_scores(indicators, objective)
    sizes = np.asarray(sizes, dtype=float)
    keep = np.array([gp is not None for gp in gaps])
    if not keep.any():
        return 0.0
    g = np.array([gp for gp in gaps if gp is not None])
    shares = sizes[keep] / sizes[keep].sum()
    return float(min(1.0, max(0.0, 1.0 - np.sum(shares * g))))


def trade_off(stat_score: float, fair_score: float, alpha: float = DEFAULT_ALPHA) -> float:
    return alpha * stat_score + (1.0 - alpha) * fair_score


@dataclass(frozen=True, eq=False)
class CandidateModel:
    n: int
    schedule: WeightSchedule | None
    pipeline: Pipeline
    threshold: float
    stat_score: float
    fair_score: float
    trade_off_score: float
    report: GroupReport
    degenerate: bool = False

    @property
    def gaps(self) -> metrics.FairnessGaps:
        return metrics.summarize_gaps(self.report)

    def summary(self) -> dict:
        d = {
            "n": self.n,
            "threshold": self.threshold,
            "stat_score": self.stat_score,
            "fair_score": self.fair_score,
            "trade_off_score": self.trade_off_score,
            "degenerate": self.degenerate,
            "group_weights": list(self.schedule.weights) if self.schedule else None,
        }
        return d


def evaluate_candidate(n, schedule, pipeline, audit: DataTable, partition: GroupPartition,
                       objective, alpha) -> CandidateModel:
    obj = _as_objective(objective)
    scores = pipeline.scores(audit)
    y = audit.target
    threshold, _ = metrics.best_f1_threshold(y, scores)
    yhat = classify(scores, threshold)
    report = metrics.group_report(y, yhat, partition)
    stat = metrics.roc_auc(y, scores)
    fair = fair_score_global(obj.indicators(report), report.sizes, obj)
    degenerate = bool(yhat.min() == yhat.max())
    return CandidateModel(n, schedule, pipeline, float(threshold), stat, fair, trade_off(stat, fair, alpha),
                          report, degenerate)


@dataclass(frozen=True, eq=False)
class CorrectionResult:
    feature: str
    objective: str
    alpha: float
    partition: GroupPartition
    baseline: CandidateModel
    candidates: list[CandidateModel]
    best: CandidateModel
    gaps: tuple

    def table(self) -> list[dict]:
        rows = [dict(self.baseline.summary(), selected=False, role="baseline")]
        for c in self.candidates:
            rows.append(dict(c.summary(), selected=c is self.best, role="candidate"))
        return rows


def select_best(candidates: Sequence[CandidateModel]) -> CandidateModel:
    """Highest trade-off; non-degenerate first, then larger fair_score, then smaller n."""
    return max(candidates, key=lambda c: (not c.degenerate, c.trade_off_score, c.fair_score, -c.n))


def run_fairdream(base: Pipeline, train: DataTable, audit: DataTable, feature: str,
                  objective=DEMOGRAPHIC_PARITY, n_candidates: int = 5, alpha: float = DEFAULT_ALPHA,
                  config: LearnerConfig | None = None, partition: GroupPartition | None = None,
                  floor: float = GAP_FLOOR) -> CorrectionResult:
    """Train ``n_candidates`` reweighted models and pick the best trade-off.

    ``partition`` groups the audit rows (defaults to the audit module's
    binning of ``feature``); training rows are mapped onto the same groups.
    The baseline is scored alongside but never selected.
    """
    from .audit import AuditConfig, partition_for

    obj = _as_objective(objective)
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    if feature not in audit.names:
        raise KeyError(f"no column named {feature!r}")
    config = config or base.model.config
    if partition is None:
        partition = partition_for(audit, feature, AuditConfig())
    baseline = evaluate_candidate(0, None, base, audit, partition, obj, alpha)
    gaps = gap_fair_scores(obj.indicators(baseline.report), obj)
    sizes = partition.sizes()
    train_groups = partition.assign(train)

    candidates = []
    for n in range(1, n_candidates + 1):
        schedule = candidate_weights(n, gaps, sizes, floor)
        w = schedule.row_weights(train_groups)
        pipe = fit_pipeline(train, config, w, encoder=base.encoder)
        candidates.append(evaluate_candidate(n, schedule, pipe, audit, partition, obj, alpha))
    best = select_best(candidates)
    return CorrectionResult(feature, obj.tag, alpha, partition, baseline, candidates, best, tuple(gaps))
