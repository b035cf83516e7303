"""Command line entry point: ``fairdream {audit,correct,benchmark,report}``.

Settings come from an optional YAML config file; command line flags override
individual keys. Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from . import report as rpt
from .audit import AuditConfig, run_audit
from .benchmark import AGE_EDGES, DEFAULT_FEATURES, BenchmarkConfig, run_benchmark
from .dataset import (DataTable, Schema, SchemaError, load_table, reference_data_path, reference_schema, split,
                      subsample)
from .gridsearch import DEFAULT_BOUND, DEFAULT_ETA, DEFAULT_GRID, run_gridsearch
from .learners import FAMILIES, LearnerConfig, UnsupportedFamily
from .metrics import OBJECTIVES
from .pipeline import Pipeline, fit_pipeline
from .reweighting import DEFAULT_ALPHA, run_fairdream

log = logging.getLogger("fairdream")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    data: Path | None = None
    schema: Path | None = None
    test_fraction: float = 0.3
    seed: int = 0
    subsample_rows: int | None = None
    learner: dict = field(default_factory=dict)
    features: list[str] | None = None
    ratio_threshold: float = 3.0
    min_group_size: int = 50
    bins: dict = field(default_factory=lambda: {"age": list(AGE_EDGES)})
    objective: str = "demographic_parity"
    alpha: float = DEFAULT_ALPHA
    n_candidates: int | None = None  # 5 for `correct`, 10 for `benchmark`
    grid_size: int = DEFAULT_GRID
    lambda_bound: float = DEFAULT_BOUND
    eta: float = DEFAULT_ETA
    families: list[str] = field(default_factory=lambda: list(FAMILIES))
    benchmark_features: list[str] = field(default_factory=lambda: list(DEFAULT_FEATURES))
    full_scale: bool = False
    out: Path = Path("fairdream-out")
    formats: list[str] = field(default_factory=lambda: list(rpt.FORMATS))

    def learner_config(self) -> LearnerConfig:
        try:
            return LearnerConfig(**{"seed": self.seed, **self.learner})
        except TypeError as exc:
            raise ConfigError(f"learner: {exc}") from None
        except (UnsupportedFamily, ValueError) as exc:
            raise ConfigError(f"learner: {exc}") from None

    def audit_config(self) -> AuditConfig:
        try:
            return AuditConfig(features=self.features, ratio_threshold=self.ratio_threshold,
                               min_group_size=self.min_group_size, bins=self.bins)
        except ValueError as exc:
            raise ConfigError(f"audit: {exc}") from None

    def validate(self) -> None:
        if self.data is not None and not self.data.exists():
            raise ConfigError(f"data file not found: {self.data}")
        if self.schema is not None and not self.schema.exists():
            raise ConfigError(f"schema file not found: {self.schema}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")
        if (self.n_candidates is not None and self.n_candidates < 1) or self.grid_size < 1:
            raise ConfigError("n_candidates and grid_size must be >= 1")
        if set(self.formats) - set(rpt.FORMATS):
            raise ConfigError(f"formats must be drawn from {rpt.FORMATS}")
        bad = set(self.families) - set(FAMILIES)
        if bad:
            raise ConfigError(f"unsupported families {sorted(bad)}")
        self.learner_config()
        self.audit_config()


_SECTIONS = {
    "split": {"test_fraction": "test_fraction", "seed": "seed"},
    "audit": {"features": "features", "ratio_threshold": "ratio_threshold",
              "min_group_size": "min_group_size", "bins": "bins"},
    "correction": {"objective": "objective", "alpha": "alpha", "n_candidates": "n_candidates",
                   "grid_size": "grid_size", "lambda_bound": "lambda_bound", "eta": "eta"},
    "benchmark": {"families": "families", "features": "benchmark_features", "full_scale": "full_scale"},
    "output": {"dir": "out", "formats": "formats"},
}


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    base = path.parent
    for key, value in raw.items():
        if key in ("data", "schema"):
            p = Path(value)
            setattr(cfg, key, p if p.is_absolute() else base / p)
        elif key in ("seed", "subsample_rows"):
            setattr(cfg, key, value)
        elif key == "learner":
            if not isinstance(value, dict):
                raise ConfigError("learner must be a mapping")
            cfg.learner = dict(value)
        elif key in _SECTIONS:
            for sub, sub_value in (value or {}).items():
                if sub not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                setattr(cfg, _SECTIONS[key][sub], sub_value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if isinstance(cfg.out, str):
        cfg.out = Path(cfg.out)
    return cfg


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.data is not None:
        cfg.data = Path(args.data)
    if args.schema is not None:
        cfg.schema = Path(args.schema)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = Path(args.out)
    if args.format:
        cfg.formats = list(dict.fromkeys(args.format))
    if args.subsample is not None:
        cfg.subsample_rows = args.subsample or None
    if getattr(args, "family", None):
        cfg.learner = {**cfg.learner, "family": args.family}
        if args.family != "gbdt":
            cfg.learner.pop("n_estimators", None)
    if getattr(args, "estimators", None):
        cfg.learner = {**cfg.learner, "n_estimators": args.estimators}
    if getattr(args, "features", None):
        if args.command == "benchmark":
            cfg.benchmark_features = args.features.split(",")
        else:
            cfg.features = args.features.split(",")
    if getattr(args, "families", None):
        cfg.families = args.families.split(",")
    if getattr(args, "full_scale", False):
        cfg.full_scale = True
    if getattr(args, "candidates", None):
        cfg.n_candidates = args.candidates
    if getattr(args, "objective", None):
        cfg.objective = args.objective
    return cfg


def load_data(cfg: RunConfig) -> DataTable:
    schema: Schema = Schema.load(cfg.schema) if cfg.schema else reference_schema()
    table = load_table(cfg.data or reference_data_path(), schema)
    if cfg.subsample_rows:
        table = subsample(table, cfg.subsample_rows, cfg.seed)
    return table


def _baseline(cfg: RunConfig, train: DataTable, model_path: str | None) -> Pipeline:
    if model_path:
        return Pipeline.load(model_path)
    return fit_pipeline(train, cfg.learner_config())


def cmd_audit(cfg: RunConfig, model_path: str | None = None) -> int:
    table = load_data(cfg)
    train, test = split(table, cfg.test_fraction, cfg.seed)
    base = _baseline(cfg, train, model_path)
    result = run_audit(base, test, cfg.audit_config())
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    text = rpt.render_alerts(result.alerts, result.threshold)
    print(text)
    if "text" in cfg.formats:
        (out / "audit.txt").write_text(text + "\n", encoding="utf-8")
    rpt.write_json(out / "audit.json", rpt.document("audit", rpt.audit_payload(result)))
    if "csv" in cfg.formats:
        for feature, report in result.reports.items():
            rpt.write_csv(out / "audit" / f"{rpt.slug(feature)}.csv", *rpt.group_report_rows(report))
    if not model_path:
        base.save(out / "baseline_model.json")
    return EXIT_OK


def cmd_correct(cfg: RunConfig, feature: str, method: str, model_path: str | None = None) -> int:
    table = load_data(cfg)
    if feature not in table.names:
        raise ConfigError(f"feature {feature!r} is not a column of the data")
    train, test = split(table, cfg.test_fraction, cfg.seed)
    base = _baseline(cfg, train, model_path)
    audit_cfg = cfg.audit_config()
    from .audit import alerts_from_report, partition_for
    part = partition_for(test, feature, audit_cfg)
    learner = base.model.config
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    if method == "fairdream":
        res = run_fairdream(base, train, test, feature, cfg.objective, cfg.n_candidates or 5, cfg.alpha,
                            learner, partition=part)
        if not alerts_from_report(res.baseline.report, audit_cfg.ratio_threshold, audit_cfg.min_group_size):
            print(f"note: baseline shows no {audit_cfg.ratio_threshold:g}:1 disparity on {feature!r}; "
                  "gaps are already small")
        text = rpt.render_correction(res)
        rpt.write_json(out / "correction.json", rpt.document("correction", rpt.correction_payload(res)))
        if "csv" in cfg.formats:
            rpt.write_csv(out / "candidates.csv", *rpt.candidate_rows(res))
            rpt.write_csv(out / "selected_groups.csv", *rpt.group_report_rows(res.best.report))
        res.best.pipeline.save(out / "selected_model.json")
    else:
        res = run_gridsearch(base, train, test, feature, cfg.objective, cfg.grid_size, cfg.lambda_bound, cfg.eta,
                             learner, partition=part, ratio_threshold=audit_cfg.ratio_threshold)
        text = rpt.render_gridsearch(res)
        rpt.write_json(out / "gridsearch.json", rpt.document("gridsearch", rpt.gridsearch_payload(res)))
        if "csv" in cfg.formats:
            rpt.write_csv(out / "grid_points.csv", *rpt.gridsearch_rows(res))
            rpt.write_csv(out / "selected_groups.csv", *rpt.group_report_rows(res.best.report))
        res.best.pipeline.save(out / "selected_model.json")
    print(text)
    if "text" in cfg.formats:
        (out / f"{method}.txt").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    schema = Schema.load(cfg.schema) if cfg.schema else reference_schema()
    table = load_table(cfg.data or reference_data_path(), schema)
    learner = dict(cfg.learner)
    overrides = dict(
        families=tuple(cfg.families), features=tuple(cfg.benchmark_features), seed=cfg.seed,
        test_fraction=cfg.test_fraction, n_candidates=cfg.n_candidates or 10, grid_size=cfg.grid_size,
        lambda_bound=cfg.lambda_bound, eta=cfg.eta,
        alpha=cfg.alpha, ratio_threshold=cfg.ratio_threshold, min_group_size=cfg.min_group_size,
        bins={k: tuple(v) for k, v in cfg.bins.items()},
    )
    if cfg.full_scale:
        bench = BenchmarkConfig.full_scale(**overrides)
    else:
        if cfg.subsample_rows:
            overrides["subsample_rows"] = cfg.subsample_rows
        if "n_estimators" in learner:
            overrides["gbdt_estimators"] = learner["n_estimators"]
        bench = BenchmarkConfig(**overrides)
    result = run_benchmark(table, config=bench)
    rpt.emit_report(result, cfg.out, cfg.formats)
    print(rpt.render_benchmark(result), end="")
    return EXIT_OK


def cmd_report(path: str) -> int:
    print(rpt.render_document(rpt.read_json(path)))
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--data", help="CSV data file (default: bundled Adult Census)")
    p.add_argument("--schema", help="YAML schema for --data")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", action="append", choices=rpt.FORMATS, help="output format (repeatable)")
    p.add_argument("--subsample", type=int, help="stratified row subsample (0 = all rows)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairdream", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="train or load a baseline and list discrimination alerts")
    _common(p)
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--estimators", type=int)
    p.add_argument("--features", help="comma-separated features to scan")
    p.add_argument("--model", help="saved pipeline to audit instead of training one")

    p = sub.add_parser("correct", help="run a correction on one feature")
    _common(p)
    p.add_argument("--feature", required=True)
    p.add_argument("--method", required=True, choices=("fairdream", "gridsearch"))
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--estimators", type=int)
    p.add_argument("--candidates", type=int)
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--model", help="saved baseline pipeline")

    p = sub.add_parser("benchmark", help="compare corrections across learner families and features")
    _common(p)
    p.add_argument("--families", help="comma-separated subset of " + ",".join(FAMILIES))
    p.add_argument("--features", help="comma-separated features")
    p.add_argument("--estimators", type=int, help="gbdt estimators at desk scale")
    p.add_argument("--full-scale", action="store_true", help="all rows and 1000 gbdt estimators")

    p = sub.add_parser("report", help="render a saved report document")
    p.add_argument("input")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.input)
        cfg = _apply_flags(load_config(args.config), args)
        cfg.validate()
        if args.command == "audit":
            return cmd_audit(cfg, args.model)
        if args.command == "correct":
            return cmd_correct(cfg, args.feature, args.method, args.model)
        return cmd_benchmark(cfg)
    except (ConfigError, SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure exit code
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
