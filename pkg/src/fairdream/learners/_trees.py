"""Shared pieces for the tree learners: candidate thresholds and tree arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_THRESHOLDS = 32


def weighted_thresholds(x: np.ndarray, w: np.ndarray, n_thresholds: int = N_THRESHOLDS) -> np.ndarray:
    """Up to ``n_thresholds`` split points at weighted quantiles of ``x``.

    Thresholds are midpoints between consecutive distinct values, so a row
    goes left iff ``x <= threshold``. Only rows with positive weight count;
    integer weights give the same thresholds as duplicated rows.
    """
    keep = w > 0
    values, inverse = np.unique(x[keep], return_inverse=True)
    if len(values) < 2:
        return np.empty(0)
    mids = 0.5 * (values[:-1] + values[1:])
    if len(values) <= n_thresholds + 1:
        return mids
    mass = np.bincount(inverse, weights=w[keep], minlength=len(values))
    cum = np.cumsum(mass)
    targets = cum[-1] * np.arange(1, n_thresholds + 1) / (n_thresholds + 1)
    pos = np.searchsorted(cum, targets, side="left")
    pos = np.unique(np.minimum(pos, len(values) - 2))
    return mids[pos]


def bin_matrix(X: np.ndarray, thresholds: list[np.ndarray]) -> tuple[np.ndarray, int]:
    """Bin index per cell: the number of thresholds strictly below the value."""
    n_bins = max(1, max((len(t) + 1 for t in thresholds), default=1))
    B = np.empty(X.shape, dtype=np.int32)
    for j, t in enumerate(thresholds):
        B[:, j] = np.searchsorted(t, X[:, j], side="left")
    return B, n_bins


@dataclass
class Tree:
    """Complete binary tree of fixed depth stored as heap-ordered arrays.

    Node ``i`` has children ``2i+1`` / ``2i+2``. ``feature[i] == -1`` marks a
    leaf; its prediction lives in ``value[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray

    @classmethod
    def empty(cls, depth: int) -> "Tree":
        size = 2 ** (depth + 1) - 1
        return cls(np.full(size, -1, dtype=np.int64), np.zeros(size), np.zeros(size))

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r = rows[inner]
            nd = node[inner]
            go_left = X[r, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, 2 * nd + 1, 2 * nd + 2)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        used = np.flatnonzero((self.feature >= 0) | (self.value != 0) | (np.arange(len(self.feature)) == 0))
        return {
            "size": len(self.feature),
            "nodes": used.tolist(),
            "feature": self.feature[used].tolist(),
            "threshold": self.threshold[used].tolist(),
            "value": self.value[used].tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        tree = cls(np.full(d["size"], -1, dtype=np.int64), np.zeros(d["size"]), np.zeros(d["size"]))
        idx = np.asarray(d["nodes"], dtype=np.int64)
        tree.feature[idx] = d["feature"]
        tree.threshold[idx] = d["threshold"]
        tree.value[idx] = d["value"]
        return tree
