"""Lagrangian grid search: fairness-constrained learning via cost-sensitive relabeling.

For multipliers ``lambda_k`` (centered so ``sum_k lambda_k |S_k| = 0``) each
row ``i`` of group ``k`` gets

    cost(predict 1) = (1 - y_i) + lambda_k / (|S_k| / N)
    cost(predict 0) = y_i

and the learner is trained on ``relabel_i = argmin cost`` with weight
``|cost(1) - cost(0)|``. Negative multipliers push a group towards positive
predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics
from .dataset import DataTable, GroupPartition
from .learners import LearnerConfig, classify
from .metrics import DEMOGRAPHIC_PARITY
from .pipeline import Pipeline, fit_pipeline

DEFAULT_ETA = 0.05
DEFAULT_BOUND = 2.0
DEFAULT_GRID = 10


def reduce_to_costs(y, assignment, lambdas: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Relabels and weights of the cost-sensitive problem for one multiplier vector."""
    y = np.asarray(y).astype(np.int64)
    assignment = np.asarray(getattr(assignment, "assignment", assignment), dtype=np.int64)
    lam = np.asarray(lambdas, dtype=float)
    if len(lam) < 2:
        raise ValueError("need multipliers for at least two groups")
    known = assignment >= 0
    sizes = np.bincount(assignment[known], minlength=len(lam)).astype(float)
    if len(sizes) != len(lam) or (sizes == 0).any():
        raise ValueError("every group must be non-empty and have a multiplier")
    if abs(np.dot(lam, sizes)) > 1e-9 * max(1.0, np.abs(lam).max() * sizes.sum()):
        raise ValueError("multipliers must satisfy sum_k lambda_k * |S_k| = 0")
    share = sizes / len(y)
    # rows outside every group (categories unseen when the groups were built) carry no multiplier
    shift = np.zeros(len(y))
    shift[known] = (lam / share)[assignment[known]]
    cost1 = (1 - y) + shift
    cost0 = y.astype(float)
    relabel = np.where(cost1 < cost0, 1, np.where(cost1 > cost0, 0, y))
    return relabel.astype(np.int8), np.abs(cost1 - cost0)


def centered_multipliers(target: int, mu: float, sizes: Sequence[int]) -> np.ndarray:
    """``mu`` on one group, the balancing value shared by all the others."""
    sizes = np.asarray(sizes, dtype=float)
    lam = np.full(len(sizes), -mu * sizes[target] / (sizes.sum() - sizes[target]))
    lam[target] = mu
    return lam


@dataclass(frozen=True, eq=False)
class LagrangianPoint:
    target_group: int
    mu: float
    multipliers: tuple[float, ...]
    n_relabeled: int
    pipeline: Pipeline
    threshold: float
    violation: float
    stat_score: float
    report: metrics.GroupReport
    degenerate: bool

    def summary(self) -> dict:
        return {
            "target_group": self.target_group,
            "lambda": self.mu,
            "multipliers": list(self.multipliers),
            "n_relabeled": self.n_relabeled,
            "threshold": self.threshold,
            "violation": self.violation,
            "stat_score": self.stat_score,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True, eq=False)
class GridSearchResult:
    feature: str
    eta: float
    partition: GroupPartition
    points: list[LagrangianPoint]
    best: LagrangianPoint
    satisfied: bool

    def table(self) -> list[dict]:
        return [dict(p.summary(), selected=p is self.best) for p in self.points]


def _violation(report: metrics.GroupReport, objective: str) -> float:
    gaps = metrics.fairness_gaps(report, objective)
    v = gaps.value
    return float("inf") if v is None else float(v)


def select_point(points: Sequence[LagrangianPoint], eta: float) -> tuple[LagrangianPoint, bool]:
    ok = [p for p in points if p.violation <= eta]
    if ok:
        return max(ok, key=lambda p: (p.stat_score, -abs(p.mu))), True
    return min(points, key=lambda p: (p.violation, -p.stat_score, abs(p.mu))), False


def disadvantaged_groups(report: metrics.GroupReport, ratio_threshold: float = 3.0) -> list[int]:
    """Groups whose OPR trails the best by ``ratio_threshold``; at least the worst-off one."""
    opr = [g.opr if g.opr is not None else np.inf for g in report.groups]
    top = max(o for o in opr if np.isfinite(o))
    out = [k for k, o in enumerate(opr) if np.isfinite(o) and o < top and (o == 0 or top / o >= ratio_threshold)]
    if not out:
        out = [int(np.argmin(opr))]
    return out


def run_gridsearch(base: Pipeline, train: DataTable, audit: DataTable, feature: str,
                   objective: str = DEMOGRAPHIC_PARITY, grid_size: int = DEFAULT_GRID,
                   lambda_bound: float = DEFAULT_BOUND, eta: float = DEFAULT_ETA,
                   config: LearnerConfig | None = None, partition: GroupPartition | None = None,
                   ratio_threshold: float = 3.0) -> GridSearchResult:
    """Sweep a signed multiplier grid in ``[-lambda_bound, lambda_bound]``.

    Two groups: one scalar multiplier on the baseline's worse-off group.
    More groups: one sweep per disadvantaged group against the rest. Each
    point is thresholded at its own F1 optimum on ``audit``; the selected
    point has the best ROC-AUC among those with violation <= ``eta``, or the
    smallest violation if none qualifies.
    """
    from .audit import AuditConfig, partition_for

    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    if feature not in audit.names:
        raise KeyError(f"no column named {feature!r}")
    config = config or base.model.config
    if partition is None:
        partition = partition_for(audit, feature, AuditConfig())
    train_groups = partition.assign(train)
    train_sizes = np.bincount(train_groups[train_groups >= 0], minlength=partition.n_groups)
    if (train_sizes == 0).any():
        raise ValueError("a group has no training rows")

    y_audit = audit.target
    base_scores = base.scores(audit)
    base_t, _ = metrics.best_f1_threshold(y_audit, base_scores)
    base_report = metrics.group_report(y_audit, classify(base_scores, base_t), partition)
    targets = disadvantaged_groups(base_report, ratio_threshold)
    if partition.n_groups == 2:
        targets = targets[:1]

    grid = np.linspace(-lambda_bound, lambda_bound, grid_size) if grid_size > 1 else np.zeros(1)
    points = []
    for target in targets:
        for mu in grid:
            lam = centered_multipliers(target, float(mu), train_sizes)
            relabel, weights = reduce_to_costs(train.target, train_groups, lam)
            pipe = fit_pipeline(train, config, weights, labels=relabel, encoder=base.encoder,
                                allow_single_class=True)
            scores = pipe.scores(audit)
            threshold, _ = metrics.best_f1_threshold(y_audit, scores)
            yhat = classify(scores, threshold)
            report = metrics.group_report(y_audit, yhat, partition)
            points.append(LagrangianPoint(
                target, float(mu), tuple(lam.tolist()), int(np.sum(relabel != train.target)), pipe,
                float(threshold), _violation(report, objective), metrics.roc_auc(y_audit, scores), report,
                bool(yhat.min() == yhat.max()),
            ))
    best, satisfied = select_point(points, eta)
    return GridSearchResult(feature, eta, partition, points, best, satisfied)
