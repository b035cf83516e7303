"""Confusion rates, ranking metrics, F1 thresholds, calibration and fairness gaps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEMOGRAPHIC_PARITY = "demographic_parity"
EQUALIZED_ODDS = "equalized_odds"
OBJECTIVES = (DEMOGRAPHIC_PARITY, EQUALIZED_ODDS)

RATES = ("base_rate", "opr", "tpr", "fpr", "precision")


class UndefinedMetric(ValueError):
    """A metric whose denominator is empty (e.g. AUC on a single class)."""


def _binary(name, v):
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if v.size and not np.isin(v, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return v.astype(np.int64)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def predicted_positive(self) -> int:
        return self.tp + self.fp

    def rates(self) -> dict[str, float | None]:
        """Rate name -> value, or None where the denominator is empty."""

        def ratio(a, b):
            return a / b if b else None

        return {
            "base_rate": ratio(self.positives, self.total),
            "opr": ratio(self.predicted_positive, self.total),
            "tpr": ratio(self.tp, self.positives),
            "fpr": ratio(self.fp, self.negatives),
            "precision": ratio(self.tp, self.predicted_positive),
        }


def confusion(y, yhat) -> ConfusionCounts:
    y = _binary("y", y)
    yhat = _binary("yhat", yhat)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {len(y)} labels vs {len(yhat)} predictions")
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fp = int(np.sum((y == 0) & (yhat == 1)))
    fn = int(np.sum((y == 1) & (yhat == 0)))
    return ConfusionCounts(tp, fp, len(y) - tp - fp - fn, fn)


@dataclass(frozen=True)
class GroupRates:
    label: str
    size: int
    counts: ConfusionCounts
    base_rate: float | None
    opr: float | None
    tpr: float | None
    fpr: float | None
    precision: float | None

    @classmethod
    def from_counts(cls, label: str, counts: ConfusionCounts) -> "GroupRates":
        return cls(label, counts.total, counts, **counts.rates())

    def get(self, name: str) -> float | None:
        return getattr(self, name)

    @property
    def undefined(self) -> list[str]:
        return [r for r in RATES if getattr(self, r) is None]

    def to_dict(self) -> dict:
        d = {"group": self.label, "size": self.size}
        d.update({k: getattr(self.counts, k) for k in ("tp", "fp", "tn", "fn")})
        d.update({r: getattr(self, r) for r in RATES})
        d["undefined"] = self.undefined
        return d


@dataclass(frozen=True)
class GroupReport:
    feature: str
    groups: tuple[GroupRates, ...]

    def values(self, rate: str) -> list[float | None]:
        return [g.get(rate) for g in self.groups]

    def defined(self, rate: str) -> np.ndarray:
        return np.array([v for v in self.values(rate) if v is not None], dtype=float)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    def to_dict(self) -> dict:
        return {"feature": self.feature, "groups": [g.to_dict() for g in self.groups]}


def group_report(y, yhat, partition) -> GroupReport:
    """Per-group confusion rates; empty denominators are reported as None."""
    y = _binary("y", y)
    yhat = _binary("yhat", yhat)
    if not (len(y) == len(yhat) == len(partition.assignment)):
        raise ValueError("labels, predictions and partition must have equal lengths")
    rows = []
    for k, label in enumerate(partition.labels()):
        m = partition.assignment == k
        rows.append(GroupRates.from_counts(label, confusion(y[m], yhat[m])))
    return GroupReport(partition.feature, tuple(rows))


def _check_scores(y, scores):
    y = _binary("y", y)
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {len(y)} labels vs {len(s)} scores")
    return y, s


def roc_auc(y, scores) -> float:
    """Mann-Whitney estimate P(s+ > s-) + P(s+ = s-)/2 via midranks."""
    y, s = _check_scores(y, scores)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("ROC-AUC needs both classes")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # midrank of each tie block
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    block_rank = 0.5 * (starts + 1 + ends)
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(block_rank, ends - starts)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _descending_blocks(y, s):
    """Cumulative (tp, fp) at the end of each tie block, highest score first."""
    order = np.argsort(-s, kind="mergesort")
    ys, ss = y[order], s[order]
    last = np.r_[ss[1:] != ss[:-1], True]
    tp = np.cumsum(ys)[last]
    fp = np.cumsum(1 - ys)[last]
    return ss[last], tp, fp


def pr_auc(y, scores) -> float:
    """Average precision: sum over thresholds of (recall step) * precision."""
    y, s = _check_scores(y, scores)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetric("PR-AUC needs at least one positive")
    _, tp, fp = _descending_blocks(y, s)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * precision))


def best_f1_threshold(y, scores) -> tuple[float, float]:
    """Observed score maximizing F1 of ``score >= t``; ties go to the larger t."""
    y, s = _check_scores(y, scores)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetric("F1 threshold needs at least one positive")
    thresholds, tp, fp = _descending_blocks(y, s)
    f1 = 2 * tp / (n_pos + tp + fp)
    # thresholds are descending, so the first maximum is the largest threshold
    k = int(np.argmax(f1))
    return float(thresholds[k]), float(f1[k])


def f1_at(y, scores, threshold) -> float:
    y, s = _check_scores(y, scores)
    pred = s >= threshold
    tp = np.sum(pred & (y == 1))
    return float(2 * tp / (y.sum() + pred.sum())) if (y.sum() + pred.sum()) else 0.0


@dataclass(frozen=True)
class CalibrationCurve:
    centers: np.ndarray
    rates: np.ndarray
    counts: np.ndarray
    n_bins: int
    label: str = ""
    scheme: str = "uniform"

    def __len__(self):
        return len(self.centers)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.centers[0]), float(self.centers[-1])

    def diagonal_distance(self) -> float:
        """Count-weighted mean |rate - center|: distance to perfect calibration."""
        if not len(self):
            return float("nan")
        return float(np.average(np.abs(self.rates - self.centers), weights=self.counts))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "scheme": f"{self.scheme}({self.n_bins})",
            "centers": self.centers.tolist(),
            "rates": self.rates.tolist(),
            "counts": self.counts.tolist(),
        }


def calibration_curve(y, scores, n_bins: int = 10, label: str = "") -> CalibrationCurve:
    """Equal-width bins on [0, 1]: mean score and positive rate per non-empty bin."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    y, s = _check_scores(y, scores)
    idx = np.clip(np.floor(s * n_bins).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=s, minlength=n_bins)
    pos = np.bincount(idx, weights=y.astype(float), minlength=n_bins)
    keep = counts > 0
    return CalibrationCurve(sums[keep] / counts[keep], pos[keep] / counts[keep], counts[keep], n_bins, label)


def calibration_gap_area(a: CalibrationCurve, b: CalibrationCurve) -> float:
    """Area between two piecewise-linear calibration curves on their common range.

    Both curves are evaluated on the merged knot set (plus the points where
    they cross) and |difference| is integrated by the trapezoidal rule, which
    is exact for piecewise-linear integrands on those knots.
    """
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each calibration curve needs at least two points")
    lo = max(a.centers[0], b.centers[0])
    hi = min(a.centers[-1], b.centers[-1])
    if not lo < hi:
        raise ValueError("calibration curves have no overlapping score range")
    knots = np.concatenate([a.centers, b.centers, [lo, hi]])
    knots = np.unique(knots[(knots >= lo) & (knots <= hi)])
    d = np.interp(knots, a.centers, a.rates) - np.interp(knots, b.centers, b.rates)
    cross = np.flatnonzero(d[:-1] * d[1:] < 0)
    if len(cross):
        t = d[cross] / (d[cross] - d[cross + 1])
        xc = knots[cross] + t * (knots[cross + 1] - knots[cross])
        knots = np.insert(knots, cross + 1, xc)
        d = np.insert(d, cross + 1, 0.0)
    ad = np.abs(d)
    return float(np.sum(0.5 * (ad[1:] + ad[:-1]) * np.diff(knots)))


@dataclass(frozen=True)
class FairnessGaps:
    objective: str
    dp_gap: float | None
    tpr_gap: float | None
    fpr_gap: float | None
    ratio: float | None
    excluded: dict = field(default_factory=dict)

    @property
    def eo_gaps(self) -> tuple[float | None, float | None]:
        return self.tpr_gap, self.fpr_gap

    @property
    def value(self) -> float | None:
        """Scalar violation for the objective (EO: the larger of its two gaps)."""
        if self.objective == DEMOGRAPHIC_PARITY:
            return self.dp_gap
        defined = [g for g in self.eo_gaps if g is not None]
        return max(defined) if defined else None

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "dp_gap": self.dp_gap,
            "tpr_gap": self.tpr_gap,
            "fpr_gap": self.fpr_gap,
            "opr_ratio": None if self.ratio is None or np.isinf(self.ratio) else self.ratio,
            "opr_ratio_infinite": bool(self.ratio is not None and np.isinf(self.ratio)),
            "excluded_groups": self.excluded,
        }


def spread(values) -> float | None:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if len(v) < 2:
        return None
    return float(v.max() - v.min())


def fairness_gaps(report: GroupReport, objective: str = DEMOGRAPHIC_PARITY) -> FairnessGaps:
    """Max-minus-min spreads of OPR, TPR, FPR across groups, plus the OPR ratio.

    Groups with an undefined rate are left out of that rate's spread.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    needed = ("opr",) if objective == DEMOGRAPHIC_PARITY else ("tpr", "fpr")
    for rate in needed:
        if len(report.defined(rate)) < 2:
            raise UndefinedMetric(f"{rate} is defined for fewer than two groups")
    opr = report.defined("opr")
    ratio = None
    if len(opr) >= 2:
        ratio = float("inf") if opr.min() == 0 and opr.max() > 0 else (
            1.0 if opr.max() == 0 else float(opr.max() / opr.min()))
    excluded = {r: [g.label for g in report.groups if g.get(r) is None] for r in ("opr", "tpr", "fpr")}
    excluded = {k: v for k, v in excluded.items() if v}
    return FairnessGaps(
        objective,
        spread(report.values("opr")),
        spread(report.values("tpr")),
        spread(report.values("fpr")),
        ratio,
        excluded,
    )


def summarize_gaps(report: GroupReport, objective: str = DEMOGRAPHIC_PARITY) -> FairnessGaps:
    """Like :func:`fairness_gaps` but never raises; missing spreads are None."""
    try:
        return fairness_gaps(report, objective)
    except UndefinedMetric:
        return FairnessGaps(objective, spread(report.values("opr")), spread(report.values("tpr")),
                            spread(report.values("fpr")), None)
