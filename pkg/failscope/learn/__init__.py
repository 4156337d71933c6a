from .experiments import (
    EarlyDetectionRow,
    LearningCurveRow,
    ReducedFeatureReport,
    cross_version_eval,
    early_detection_sweep,
    learning_curve,
    rank_features,
    reduced_feature_eval,
    stratified_sample,
)
from .metrics import MeanMetrics, Metrics
from .tree import DecisionTree, Node, fit, gini
from .validation import CvReport, FoldResult, FoldSplit, fold_count, kfold, split_folds

__all__ = [
    "CvReport",
    "DecisionTree",
    "EarlyDetectionRow",
    "FoldResult",
    "FoldSplit",
    "LearningCurveRow",
    "MeanMetrics",
    "Metrics",
    "Node",
    "ReducedFeatureReport",
    "cross_version_eval",
    "early_detection_sweep",
    "fit",
    "fold_count",
    "gini",
    "kfold",
    "learning_curve",
    "rank_features",
    "reduced_feature_eval",
    "split_folds",
    "stratified_sample",
]
