"""Unsupervised anomaly detectors with interquartile-rule thresholding."""

from specsentry.detectors.autoencoder import (
    fit_autoencoder,
    init_params,
    loss_and_grads,
    score_autoencoder,
)
from specsentry.detectors.base import (
    DETECTOR_KINDS,
    DetectorModel,
    classify,
    classify_matrix,
    score_matrix,
    train_detector,
)
from specsentry.detectors.copod import fit_copod, sample_skewness, score_copod
from specsentry.detectors.iforest import average_path_length, fit_iforest, score_iforest
from specsentry.detectors.lof import fit_lof, score_lof
from specsentry.detectors.ocsvm import fit_ocsvm, rbf_kernel, score_ocsvm
from specsentry.detectors.serialize import (
    load_model,
    model_from_doc,
    model_to_doc,
    save_model,
)
from specsentry.detectors.threshold import AnomalyVerdict, fit_iqr_threshold, verdict_for

__all__ = [
    "DETECTOR_KINDS",
    "DetectorModel",
    "AnomalyVerdict",
    "train_detector",
    "score_matrix",
    "classify",
    "classify_matrix",
    "fit_iqr_threshold",
    "verdict_for",
    "fit_autoencoder",
    "score_autoencoder",
    "init_params",
    "loss_and_grads",
    "fit_lof",
    "score_lof",
    "fit_ocsvm",
    "score_ocsvm",
    "rbf_kernel",
    "fit_iforest",
    "score_iforest",
    "average_path_length",
    "fit_copod",
    "score_copod",
    "sample_skewness",
    "save_model",
    "load_model",
    "model_to_doc",
    "model_from_doc",
]
