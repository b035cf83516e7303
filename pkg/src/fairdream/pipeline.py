"""An encoder and a trained learner bundled so they can score raw tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ColumnSpec, DataTable, Encoder
from .learners import LearnerConfig, TrainedModel, model_from_dict, model_to_dict, predict_scores, train

PIPELINE_FORMAT = "fairdream.pipeline/1"


@dataclass(frozen=True, eq=False)
class Pipeline:
    encoder: Encoder
    model: TrainedModel

    def scores(self, table: DataTable) -> np.ndarray:
        return predict_scores(self.model, self.encoder.transform(table))

    @property
    def family(self) -> str:
        return self.model.config.family

    def to_dict(self) -> dict:
        enc = self.encoder
        return {
            "format": PIPELINE_FORMAT,
            "encoder": {
                "mode": enc.mode,
                "columns": [[c.name, c.kind] for c in enc.columns],
                "categories": {k: list(v) for k, v in enc.categories.items()},
                "means": dict(enc.means),
                "scales": dict(enc.scales),
            },
            "model": model_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pipeline":
        if d.get("format") != PIPELINE_FORMAT:
            raise ValueError(f"unsupported pipeline format {d.get('format')!r}")
        e = d["encoder"]
        encoder = Encoder(
            e["mode"],
            tuple(ColumnSpec(n, k) for n, k in e["columns"]),
            {k: tuple(v) for k, v in e["categories"].items()},
            e["means"],
            e["scales"],
        )
        return cls(encoder, model_from_dict(d["model"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Pipeline":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_pipeline(table: DataTable, config: LearnerConfig, weights=None, *, labels=None,
                 encoder: Encoder | None = None, allow_single_class: bool = False) -> Pipeline:
    """Encode ``table`` (fitting an encoder unless given one) and train on it."""
    if encoder is None:
        encoder = Encoder.fit(table, config.encoding)
    X = encoder.transform(table)
    model = train(X, weights, config, y=labels, allow_single_class=allow_single_class)
    return Pipeline(encoder, model)
