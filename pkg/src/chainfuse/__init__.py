"""chainfuse: multi-label classification with chain ensembles and pluggable fusion."""

__version__ = "0.1.0"

from .datasets import (
    ArffError,
    DatasetStats,
    FeatureSpec,
    FoldPlan,
    MultiLabelDataset,
    dataset_stats,
    diversity,
    parse_dataset,
    plan_folds,
    to_arff,
)
from .correlation import (
    ContingencyTable,
    PhiMatrix,
    chi_square,
    contingency,
    dependent_labels,
    phi,
    phi_matrix,
)
from .metrics import MetricReport, aggregate
from .evaluation import ExperimentConfig, PerformanceMatrix, model_performance, run_experiment

__all__ = [
    "ArffError",
    "ContingencyTable",
    "DatasetStats",
    "ExperimentConfig",
    "FeatureSpec",
    "FoldPlan",
    "MetricReport",
    "MultiLabelDataset",
    "PerformanceMatrix",
    "PhiMatrix",
    "aggregate",
    "chi_square",
    "contingency",
    "dataset_stats",
    "dependent_labels",
    "diversity",
    "model_performance",
    "parse_dataset",
    "phi",
    "phi_matrix",
    "plan_folds",
    "run_experiment",
    "to_arff",
]
