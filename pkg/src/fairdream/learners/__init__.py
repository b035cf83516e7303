"""Sample-weight-aware binary classifiers: boosted trees, random forest, logistic."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..dataset import EncodedMatrix
from .forest import VotingForest, fit_voting_forest
from .gbdt import BoostedTrees, fit_boosted_trees
from .logistic import LogisticModel, fit_logistic

FAMILIES = ("gbdt", "random_forest", "logistic")
MODEL_FORMAT = "fairdream.model/1"

# tree learners use ordinal codes, the linear one standardized one-hot columns
ENCODING = {"gbdt": "tree", "random_forest": "tree", "logistic": "linear"}


class UnsupportedFamily(ValueError):
    pass


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    family: str = "gbdt"
    n_estimators: int | None = None
    max_depth: int = 3
    learning_rate: float = 0.1
    l2_penalty: float = 1.0
    min_child_weight: float = 1.0
    max_iterations: int = 100
    tolerance: float = 1e-8
    max_features: str | int | None = "sqrt"
    n_thresholds: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedFamily(f"unsupported learner family {self.family!r}; choose from {FAMILIES}")
        if self.n_estimators is None:
            object.__setattr__(self, "n_estimators", 1000 if self.family == "gbdt" else 100)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")

    @property
    def encoding(self) -> str:
        return ENCODING[self.family]

    def with_(self, **changes) -> "LearnerConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ConstantScorer:
    """Stands in for a learner when the weighted training data has one class."""

    score: float

    def predict_scores(self, X):
        return np.full(X.shape[0], self.score)

    def to_dict(self):
        return {"score": self.score}

    @classmethod
    def from_dict(cls, d):
        return cls(d["score"])


_PARAM_TYPES = {
    "gbdt": BoostedTrees,
    "random_forest": VotingForest,
    "logistic": LogisticModel,
    "constant": ConstantScorer,
}


@dataclass(frozen=True, eq=False)
class TrainedModel:
    family: str
    params: object
    config: LearnerConfig
    n_features: int
    feature_names: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return isinstance(self.params, ConstantScorer)

    def predict_scores(self, X) -> np.ndarray:
        return predict_scores(self, X)


def _as_array(X) -> np.ndarray:
    return X.X if isinstance(X, EncodedMatrix) else np.asarray(X, dtype=float)


def weight_digest(w: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(w, dtype=float).tobytes()).hexdigest()[:16]


def train(X: EncodedMatrix | np.ndarray, w, config: LearnerConfig, y=None, *,
          allow_single_class: bool = False) -> TrainedModel:
    """Fit one learner on encoded rows with per-row weights.

    ``y`` defaults to the target carried by the EncodedMatrix. Single-class
    weighted data raises ``TrainingError`` unless ``allow_single_class`` is
    set, in which case a constant scorer at the weighted base rate is
    returned.
    """
    names = X.feature_names if isinstance(X, EncodedMatrix) else ()
    if y is None:
        if not isinstance(X, EncodedMatrix):
            raise ValueError("labels are required for a raw feature matrix")
        y = X.y
    A = _as_array(X)
    y = np.asarray(y)
    n, p = A.shape
    if n == 0:
        raise TrainingError("cannot train on an empty matrix")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weight vector has length {w.shape[0]}, expected {n}")
    if (w < 0).any() or not np.isfinite(w).all():
        raise ValueError("weights must be finite and non-negative")
    if not w.sum() > 0:
        raise ValueError("at least one weight must be positive")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    bad = ~np.isfinite(A).all(axis=0)
    if bad.any():
        col = int(np.flatnonzero(bad)[0])
        label = names[col] if names else f"#{col}"
        raise ValueError(f"non-finite values in feature column {label}")

    meta = {"seed": config.seed, "weight_digest": weight_digest(w), "n_rows": n}
    pos = float(np.sum(w * y))
    neg = float(np.sum(w * (1 - y)))
    if pos <= 0 or neg <= 0:
        if not allow_single_class:
            raise TrainingError("weighted training data contains a single class")
        return TrainedModel("constant", ConstantScorer(pos / (pos + neg)), config, p, tuple(names), meta)

    if config.family == "gbdt":
        params = fit_boosted_trees(
            A, y, w,
            n_estimators=config.n_estimators, max_depth=config.max_depth,
            learning_rate=config.learning_rate, l2_penalty=config.l2_penalty,
            min_child_weight=config.min_child_weight, n_thresholds=config.n_thresholds,
        )
    elif config.family == "random_forest":
        params = fit_voting_forest(
            A, y, w,
            n_estimators=config.n_estimators, max_depth=config.max_depth, seed=config.seed,
            max_features=config.max_features, n_thresholds=config.n_thresholds,
        )
    else:
        params = fit_logistic(A, y, w, l2_penalty=config.l2_penalty,
                              max_iterations=config.max_iterations, tolerance=config.tolerance)
        meta["grad_norm"] = params.grad_norm
    return TrainedModel(config.family, params, config, p, tuple(names), meta)


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    A = _as_array(X)
    if A.ndim != 2 or A.shape[1] != model.n_features:
        if A.size == 0 and A.ndim == 2 and A.shape[0] == 0:
            return np.empty(0)
        raise ValueError(f"expected {model.n_features} feature columns, got shape {A.shape}")
    if A.shape[0] == 0:
        return np.empty(0)
    return np.clip(model.params.predict_scores(A), 0.0, 1.0)


def classify(scores, threshold: float) -> np.ndarray:
    """1 where score >= threshold, else 0."""
    return (np.asarray(scores, dtype=float) >= threshold).astype(np.int8)


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "family": model.family,
        "config": model.config.to_dict(),
        "n_features": model.n_features,
        "feature_names": list(model.feature_names),
        "metadata": model.metadata,
        "params": model.params.to_dict(),
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    params = _PARAM_TYPES[d["family"]].from_dict(d["params"])
    return TrainedModel(d["family"], params, LearnerConfig(**d["config"]), d["n_features"],
                        tuple(d["feature_names"]), d["metadata"])


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "FAMILIES", "LearnerConfig", "TrainedModel", "TrainingError", "UnsupportedFamily",
    "train", "predict_scores", "classify", "save_model", "load_model", "model_to_dict", "model_from_dict",
]
