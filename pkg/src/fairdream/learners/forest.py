"""Random forest of depth-limited Gini trees grown on weighted bootstraps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._trees import Tree, bin_matrix, weighted_thresholds


@dataclass
class VotingForest:
    trees: list[Tree]

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            return np.zeros(X.shape[0])
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "VotingForest":
        return cls([Tree.from_dict(t) for t in d["trees"]])


def _n_candidate_features(p: int, max_features) -> int:
    if max_features in (None, "all"):
        return p
    if max_features == "sqrt":
        return max(1, int(np.sqrt(p)))
    return max(1, min(p, int(max_features)))


def fit_voting_forest(X, y, w, *, n_estimators, max_depth, seed, max_features="sqrt", n_thresholds=32) -> VotingForest:
    """Each tree sees ``n`` rows drawn with probability proportional to ``w``.

    Trees predict the majority class of their leaf; the forest score is the
    fraction of trees voting positive.
    """
    n, p = X.shape
    y = y.astype(np.int64)
    w = w.astype(float)
    rng = np.random.default_rng(seed)
    thresholds = [weighted_thresholds(X[:, j], w, n_thresholds) for j in range(p)]
    B, nb = bin_matrix(X, thresholds)
    valid_bin = np.zeros((p, nb), dtype=bool)
    for j, t in enumerate(thresholds):
        valid_bin[j, : len(t)] = True
    codes = B + (np.arange(p) * nb)[None, :]
    prob = w / w.sum()
    n_draw = int(np.count_nonzero(w > 0))
    m_try = _n_candidate_features(p, max_features)

    trees = []
    for _ in range(n_estimators):
        mult = np.bincount(rng.choice(n, size=n_draw, replace=True, p=prob), minlength=n).astype(float)
        tree = Tree.empty(max_depth)
        node = np.zeros(n, dtype=np.int64)
        active = mult > 0
        for level in range(max_depth + 1):
            first = 2**level - 1
            width = 2**level
            rows = np.flatnonzero(active)
            if not len(rows):
                break
            local = node[rows] - first
            pos = np.bincount(local, weights=mult[rows] * y[rows], minlength=width)
            tot = np.bincount(local, weights=mult[rows], minlength=width)
            if level == max_depth:
                leaves = np.flatnonzero(tot > 0)
                tree.value[first + leaves] = (2 * pos[leaves] > tot[leaves]).astype(float)
                break
            keys = (local[:, None] * (p * nb) + codes[rows]).ravel()
            size = width * p * nb
            P = np.bincount(keys, weights=np.repeat(mult[rows] * y[rows], p), minlength=size).reshape(width, p, nb)
            T = np.bincount(keys, weights=np.repeat(mult[rows], p), minlength=size).reshape(width, p, nb)
            PL = np.cumsum(P, axis=2)
            TL = np.cumsum(T, axis=2)
            PR = pos[:, None, None] - PL
            TR = tot[:, None, None] - TL
            with np.errstate(divide="ignore", invalid="ignore"):
                # sum of squared class counts over node size: larger means purer
                score = (PL**2 + (TL - PL) ** 2) / TL + (PR**2 + (TR - PR) ** 2) / TR
            parent = (pos**2 + (tot - pos) ** 2) / np.maximum(tot, 1e-300)
            ok = valid_bin[None] & (TL > 0) & (TR > 0)
            gain = np.where(ok, score - parent[:, None, None], -np.inf)

            split_feature = np.full(width, -1)
            split_bin = np.zeros(width, dtype=np.int64)
            for k in np.flatnonzero(tot > 0):
                feats = np.sort(rng.choice(p, size=m_try, replace=False))
                gk = gain[k, feats].ravel()
                best = gk.max()
                if not np.isfinite(best) or best <= 1e-12 * tot[k]:
                    tree.value[first + k] = float(2 * pos[k] > tot[k])
                    continue
                idx = int(np.argmax(gk >= best - 1e-10 * abs(best)))
                jj, b = divmod(idx, nb)
                j = int(feats[jj])
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
        trees.append(tree)
    return VotingForest(trees)
