"""L2-regularized logistic regression with per-row weights."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass
class LogisticModel:
    intercept: float
    coef: np.ndarray
    n_iter: int = 0
    grad_norm: float = 0.0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + X @ self.coef

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_dict(self) -> dict:
        return {"intercept": self.intercept, "coef": self.coef.tolist(), "n_iter": self.n_iter,
                "grad_norm": self.grad_norm}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(d["intercept"], np.asarray(d["coef"], dtype=float), d.get("n_iter", 0), d.get("grad_norm", 0.0))


def _objective(beta, Xa, y, w, penalty):
    z = Xa @ beta
    return float(np.sum(w * (np.logaddexp(0.0, z) - y * z)) + 0.5 * np.sum(penalty * beta**2))


def fit_logistic(X, y, w, *, l2_penalty, max_iterations=100, tolerance=1e-8) -> LogisticModel:
    """Minimize ``sum_i w_i * logloss_i + l2/2 * ||coef||^2`` (intercept unpenalized).

    Damped Newton steps with Armijo backtracking; stops once the max-norm of
    the gradient is at most ``tolerance``.
    """
    n, p = X.shape
    Xa = np.hstack([np.ones((n, 1)), X])
    y = y.astype(float)
    w = w.astype(float)
    penalty = np.full(p + 1, float(l2_penalty))
    penalty[0] = 0.0

    rate = min(max(np.sum(w * y) / np.sum(w), 1e-12), 1 - 1e-12)
    beta = np.zeros(p + 1)
    beta[0] = np.log(rate / (1 - rate))
    f = _objective(beta, Xa, y, w, penalty)
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iterations + 1):
        prob = expit(Xa @ beta)
        grad = Xa.T @ (w * (prob - y)) + penalty * beta
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= tolerance:
            break
        hess = (Xa * (w * prob * (1 - prob))[:, None]).T @ Xa + np.diag(penalty)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        slope = float(grad @ step)
        if slope >= 0:
            step, slope = -grad, -float(grad @ grad)
        # Near the optimum the objective stops resolving decreases in float64;
        # a full step that halves the gradient is then taken without line search.
        cand = beta + step
        g_new = Xa.T @ (w * (expit(Xa @ cand) - y)) + penalty * cand
        if np.max(np.abs(g_new)) <= 0.5 * grad_norm:
            beta, f = cand, _objective(cand, Xa, y, w, penalty)
            continue
        t = 1.0
        while True:
            cand = beta + t * step
            f_new = _objective(cand, Xa, y, w, penalty)
            if f_new <= f + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if t < 1e-12 and f_new > f:
            break
        beta, f = cand, f_new
    else:
        prob = expit(Xa @ beta)
        grad_norm = float(np.max(np.abs(Xa.T @ (w * (prob - y)) + penalty * beta)))
    if grad_norm > tolerance:
        warnings.warn(f"logistic solver stopped with gradient norm {grad_norm:.3g} > {tolerance:g}", RuntimeWarning)
    return LogisticModel(float(beta[0]), beta[1:].copy(), it, grad_norm)
