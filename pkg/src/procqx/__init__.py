"""Explainable process outcome prediction for manufacturing event logs."""

from .process_data import (
    FEATURE_NAMES,
    LabeledDataset,
    apply_standardizer,
    extract_features,
    fit_standardizer,
    load_event_log,
    stratified_split,
)
from .datagen import fit_generator, sample_dataset, simulate_event_log
from .neural_net import NetworkConfig, predict, train
from .evaluation import best_mcc_threshold, evaluate_scores, pr_auprc, roc_auroc, single_threshold_metrics
from .explain import exact_shapley, ice_curve, mc_shapley, pdp_curve, shap_global_summary
from .bundle import ModelBundle, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "LabeledDataset",
    "ModelBundle",
    "NetworkConfig",
    "apply_standardizer",
    "best_mcc_threshold",
    "evaluate_scores",
    "exact_shapley",
    "extract_features",
    "fit_generator",
    "fit_standardizer",
    "ice_curve",
    "load_event_log",
    "load_model",
    "mc_shapley",
    "pdp_curve",
    "pr_auprc",
    "predict",
    "roc_auroc",
    "sample_dataset",
    "save_model",
    "shap_global_summary",
    "simulate_event_log",
    "single_threshold_metrics",
    "stratified_split",
    "train",
]
