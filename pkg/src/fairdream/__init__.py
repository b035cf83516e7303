"""Group-fairness audit and in-processing correction for tabular binary classifiers."""

from .audit import Alert, AuditConfig, AuditResult, detect_alerts, run_audit
from .benchmark import BenchmarkConfig, BenchmarkResult, run_benchmark
from .dataset import DataTable, GroupPartition, bin_feature, encode, load_reference, load_table, split
from .gridsearch import GridSearchResult, reduce_to_costs, run_gridsearch
from .learners import LearnerConfig, TrainedModel, classify, predict_scores, train
from .pipeline import Pipeline, fit_pipeline
from .reweighting import CorrectionResult, candidate_weights, fair_score_global, gap_fair_scores, run_fairdream

__version__ = "0.1.0"

__all__ = [
    "Alert", "AuditConfig", "AuditResult", "BenchmarkConfig", "BenchmarkResult", "CorrectionResult",
    "DataTable", "GridSearchResult", "GroupPartition", "LearnerConfig", "Pipeline", "TrainedModel",
    "bin_feature", "candidate_weights", "classify", "detect_alerts", "encode", "fair_score_global",
    "fit_pipeline", "gap_fair_scores", "load_reference", "load_table", "predict_scores", "reduce_to_costs",
    "run_audit", "run_benchmark", "run_fairdream", "run_gridsearch", "split", "train",
]
