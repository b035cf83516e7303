import numpy as np
import pytest

from conftest import synthetic_table
from fairdream import metrics
from fairdream.dataset import bin_feature, split
from fairdream.gridsearch import (centered_multipliers, disadvantaged_groups, reduce_to_costs, run_gridsearch,
                                  select_point)
from fairdream.learners import LearnerConfig, classify
from fairdream.pipeline import fit_pipeline


class TestReduction:
    def test_zero_multipliers_are_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            y = rng.integers(0, 2, size=200)
            g = rng.integers(0, 3, size=200)
            g[:3] = [0, 1, 2]
            relabel, w = reduce_to_costs(y, g, [0.0, 0.0, 0.0])
            assert np.array_equal(relabel, y)
            assert np.all(w == 1.0)

    def test_saturation(self):
        y = np.array([0, 1, 0, 1, 0, 1, 0, 1])
        g = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        share = 0.5
        lam = centered_multipliers(0, -2 * share, [4, 4])
        relabel, w = reduce_to_costs(y, g, lam)
        assert relabel[g == 0].tolist() == [1, 1, 1, 1]
        # cost(1) - cost(0) = (1 - 2y) - 2 for group 0
        assert w[g == 0].tolist() == [1.0, 3.0, 1.0, 3.0]

    def test_consistent_positive(self):
        relabel, w = reduce_to_costs([1, 0], [0, 1], [0.0, 0.0])
        assert relabel[0] == 1 and w[0] == 1.0

    def test_ties_keep_label(self):
        # lambda / share = 1 makes cost(1) == cost(0) == 1 for positives of group 0
        y = np.array([0, 1, 0, 1])
        g = np.array([0, 0, 1, 1])
        relabel, w = reduce_to_costs(y, g, [0.5, -0.5])
        assert relabel[1] == 1 and w[1] == 0.0
        assert relabel[0] == 0 and w[0] == 2.0

    def test_centering(self):
        lam = centered_multipliers(1, 0.7, [30, 50, 20])
        assert np.dot(lam, [30, 50, 20]) == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(ValueError):
            reduce_to_costs([0, 1, 0], [0, 1, 1], [1.0, 1.0])
        with pytest.raises(ValueError):
            reduce_to_costs([0, 1, 0], [0, 0, 0], [0.0, 0.0])

    def test_unassigned_rows_carry_no_multiplier(self):
        y = np.array([0, 1, 0, 1, 0])
        g = np.array([0, 0, 1, 1, -1])
        relabel, w = reduce_to_costs(y, g, [-1.0, 1.0])
        assert relabel[4] == 0 and w[4] == 1.0

    def test_weights_relabels_valid(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            y = rng.integers(0, 2, size=100)
            g = np.r_[0, 1, rng.integers(0, 2, size=98)]
            lam = centered_multipliers(0, rng.uniform(-2, 2), np.bincount(g))
            relabel, w = reduce_to_costs(y, g, lam)
            assert set(np.unique(relabel)) <= {0, 1} and np.all(w >= 0)


@pytest.fixture(scope="module")
def setup():
    t = synthetic_table(1500, seed=8)
    train, audit = split(t, 0.3, 0)
    config = LearnerConfig(family="gbdt", n_estimators=20)
    base = fit_pipeline(train, config)
    return train, audit, base, config, bin_feature(audit, "cat")


def test_grid_with_zero_reproduces_baseline(setup):
    train, audit, base, config, part = setup
    res = run_gridsearch(base, train, audit, "cat", grid_size=3, partition=part)
    zero = [p for p in res.points if p.mu == 0.0]
    assert zero
    for p in zero:
        assert p.n_relabeled == 0
        assert np.array_equal(p.pipeline.scores(audit), base.scores(audit))


def test_violation_bookkeeping(setup):
    train, audit, base, config, part = setup
    res = run_gridsearch(base, train, audit, "cat", grid_size=5, partition=part)
    assert len(res.points) == 5 * len(disadvantaged_groups(
        metrics.group_report(audit.target, classify(base.scores(audit),
                                                    metrics.best_f1_threshold(audit.target, base.scores(audit))[0]),
                             part)))
    b = res.best
    yhat = classify(b.pipeline.scores(audit), b.threshold)
    recomputed = metrics.fairness_gaps(metrics.group_report(audit.target, yhat, part)).dp_gap
    assert b.violation == pytest.approx(recomputed, abs=1e-12)
    if res.satisfied:
        ok = [p for p in res.points if p.violation <= res.eta]
        assert b.stat_score == max(p.stat_score for p in ok)
    else:
        assert b.violation == min(p.violation for p in res.points)


def test_vacuous_constraint(setup):
    train, audit, base, config, part = setup
    res = run_gridsearch(base, train, audit, "cat", grid_size=5, eta=1.0, partition=part)
    assert res.satisfied
    assert res.best.stat_score == max(p.stat_score for p in res.points)


def test_degenerate_points_are_measured(setup):
    train, audit, base, config, part = setup
    res = run_gridsearch(base, train, audit, "cat", grid_size=4, lambda_bound=50.0, partition=part)
    assert all(np.isfinite(p.violation) for p in res.points)
    assert res.table()[0]["lambda"] == -50.0


def test_monotone_pressure():
    """Target group's training OPR rises as the multiplier favours it (<= 1 inversion per grid).

    Measured at the cost-sensitive decision rule (score >= 0.5). Each point's
    F1 cutoff is not used here: once the grid saturates, every group's labels
    collapse to a group indicator and the cutoff lands inside the target's
    near-constant scores, so that OPR is noise.
    """
    for seed in range(3):
        t = synthetic_table(1500, seed=20 + seed)
        train, audit = split(t, 0.3, seed)
        config = LearnerConfig(family="logistic")
        base = fit_pipeline(train, config)
        part = bin_feature(audit, "cat")
        res = run_gridsearch(base, train, audit, "cat", grid_size=10, partition=part)
        train_part = part.apply(train)
        for target in sorted({p.target_group for p in res.points}):
            pts = sorted((p for p in res.points if p.target_group == target), key=lambda p: -p.mu)
            in_target = train_part.assignment == target
            oprs = [classify(p.pipeline.scores(train), 0.5)[in_target].mean() for p in pts]
            means = [p.pipeline.scores(train)[in_target].mean() for p in pts]
            assert np.sum(np.diff(oprs) < 0) <= 1
            assert np.sum(np.diff(means) < 0) <= 1


def test_select_point_fallback():
    class P:
        def __init__(self, mu, v, s):
            self.mu, self.violation, self.stat_score = mu, v, s
    pts = [P(-1, 0.3, 0.9), P(0.5, 0.2, 0.6), P(1, 0.2, 0.7)]
    best, ok = select_point(pts, 0.05)
    assert not ok and best.mu == 1
    best, ok = select_point(pts, 0.25)
    assert ok and best.mu == 1
