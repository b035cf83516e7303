"""Second-order gradient boosting of depth-limited trees on weighted log-loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._trees import Tree, bin_matrix, weighted_thresholds

# split ties closer than this (relative) are resolved by feature/bin order
_TIE_RTOL = 1e-10


@dataclass
class BoostedTrees:
    base_score: float
    learning_rate: float
    trees: list[Tree]
    train_loss: list[float] = field(default_factory=list)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        F = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            F += tree.predict(X)
        return F

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "trees": [t.to_dict() for t in self.trees],
            "train_loss": list(self.train_loss),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedTrees":
        return cls(d["base_score"], d["learning_rate"], [Tree.from_dict(t) for t in d["trees"]], d.get("train_loss", []))


def _weighted_logloss(F, y, w):
    return float(np.sum(w * (np.logaddexp(0.0, F) - y * F)))


def _leaf_value(G, H, lam, learning_rate):
    """Newton step -lr * G / (H + lam); zero for nodes carrying no curvature."""
    denom = np.asarray(H + lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(denom > 0, -learning_rate * G / denom, 0.0)
    return v


def fit_boosted_trees(X, y, w, *, n_estimators, max_depth, learning_rate, l2_penalty, min_child_weight,
                      n_thresholds=32) -> BoostedTrees:
    n, p = X.shape
    y = y.astype(float)
    w = w.astype(float)
    thresholds = [weighted_thresholds(X[:, j], w, n_thresholds) for j in range(p)]
    B, nb = bin_matrix(X, thresholds)
    valid_bin = np.zeros((p, nb), dtype=bool)
    for j, t in enumerate(thresholds):
        valid_bin[j, : len(t)] = True
    codes = B + (np.arange(p) * nb)[None, :]
    lam = float(l2_penalty)

    rate = np.sum(w * y) / np.sum(w)
    rate = min(max(rate, 1e-12), 1 - 1e-12)
    base = float(np.log(rate / (1 - rate)))
    F = np.full(n, base)
    trees = []
    losses = [_weighted_logloss(F, y, w)]

    for _ in range(n_estimators):
        prob = expit(F)
        g = w * (prob - y)
        h = w * prob * (1.0 - prob)
        tree = Tree.empty(max_depth)
        node = np.zeros(n, dtype=np.int64)
        active = np.ones(n, dtype=bool)
        for level in range(max_depth + 1):
            first = 2**level - 1
            width = 2**level
            rows = np.flatnonzero(active)
            if not len(rows):
                break
            local = node[rows] - first
            Gt = np.bincount(local, weights=g[rows], minlength=width)
            Ht = np.bincount(local, weights=h[rows], minlength=width)
            if level == max_depth:
                leaves = np.flatnonzero(np.bincount(local, minlength=width) > 0)
                tree.value[first + leaves] = _leaf_value(Gt[leaves], Ht[leaves], lam, learning_rate)
                break
            keys = (local[:, None] * (p * nb) + codes[rows]).ravel()
            size = width * p * nb
            G = np.bincount(keys, weights=np.repeat(g[rows], p), minlength=size).reshape(width, p, nb)
            H = np.bincount(keys, weights=np.repeat(h[rows], p), minlength=size).reshape(width, p, nb)
            GL = np.cumsum(G, axis=2)
            HL = np.cumsum(H, axis=2)
            GR = Gt[:, None, None] - GL
            HR = Ht[:, None, None] - HL
            with np.errstate(divide="ignore", invalid="ignore"):
                parent = Gt**2 / (Ht + lam)
                gain = GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent[:, None, None]
            ok = valid_bin[None, :, :] & (HL >= min_child_weight) & (HR >= min_child_weight) & (HL > 0) & (HR > 0)
            gain = np.where(ok, gain, -np.inf).reshape(width, p * nb)

            present = np.bincount(local, minlength=width) > 0
            split_feature = np.full(width, -1)
            split_bin = np.zeros(width, dtype=np.int64)
            for k in np.flatnonzero(present):
                best = gain[k].max()
                floor = 1e-14 * (Ht[k] + lam)
                if not np.isfinite(best) or best <= floor:
                    tree.value[first + k] = _leaf_value(Gt[k], Ht[k], lam, learning_rate)
                    continue
                idx = int(np.argmax(gain[k] >= best - _TIE_RTOL * abs(best)))
                j, b = divmod(idx, nb)
                split_feature[k] = j
                split_bin[k] = b
                tree.feature[first + k] = j
                tree.threshold[first + k] = thresholds[j][b]

            f_rows = split_feature[local]
            splitting = f_rows >= 0
            active[rows[~splitting]] = False
            r = rows[splitting]
            right = B[r, f_rows[splitting]] > split_bin[local[splitting]]
            node[r] = 2 * node[r] + 1 + right
        F = F + tree.value[node]
        trees.append(tree)
        losses.append(_weighted_logloss(F, y, w))

    return BoostedTrees(base, learning_rate, trees, losses)
