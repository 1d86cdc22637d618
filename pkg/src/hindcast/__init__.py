"""Temporal backtesting for tabular classifiers.

Simulates training at every past deployment date under sliding-window and
all-historical regimes, evaluates each model on all future time points, and
aggregates staleness curves, all-period baselines and drift diagnostics.
"""

__version__ = "0.1.0"

from .dataset import (
    ColumnSpec,
    FeatureMatrix,
    PreprocessorState,
    TemporalDataset,
    fit_preprocessor,
    load_csv,
    missingness_profile,
    transform,
)
from .engine import (
    EvalRecord,
    ExperimentConfig,
    aggregate_by_staleness,
    run_all_period,
    run_emdot,
    run_experiment,
    summarize,
)
from .metrics import MetricValue, auprc, auroc, prevalence, weighted_multilabel_auroc
from .models import HyperGrid, TrainedModel, grid_search, importance, predict_scores
from .splitter import (
    RegimeSpec,
    SplitPlan,
    SplitRatios,
    all_period_split,
    build_split_plan,
    regime_train_val,
    test_sets,
)
from .synth import DriftSpec, FeatureBlock, feature_churn_spec, generate

__all__ = [
    "__version__",
    "ColumnSpec", "FeatureMatrix", "PreprocessorState", "TemporalDataset",
    "fit_preprocessor", "load_csv", "missingness_profile", "transform",
    "EvalRecord", "ExperimentConfig", "aggregate_by_staleness",
    "run_all_period", "run_emdot", "run_experiment", "summarize",
    "MetricValue", "auprc", "auroc", "prevalence", "weighted_multilabel_auroc",
    "HyperGrid", "TrainedModel", "grid_search", "importance", "predict_scores",
    "RegimeSpec", "SplitPlan", "SplitRatios", "all_period_split",
    "build_split_plan", "regime_train_val", "test_sets",
    "DriftSpec", "FeatureBlock", "feature_churn_spec", "generate",
]
