"""Detector model container, training dispatch, and classification."""

import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from specsentry.detectors.autoencoder import fit_autoencoder, score_autoencoder
from specsentry.detectors.copod import fit_copod, score_copod
from specsentry.detectors.iforest import fit_iforest, score_iforest
from specsentry.detectors.lof import fit_lof, score_lof
from specsentry.detectors.ocsvm import fit_ocsvm, score_ocsvm
from specsentry.detectors.threshold import AnomalyVerdict, fit_iqr_threshold, verdict_for

DETECTOR_KINDS = ("autoencoder", "lof", "ocsvm", "iforest", "copod")


@dataclass
class DetectorModel:
    """A trained scorer plus everything needed to apply it elsewhere:
    feature frame, IQR thresholds, and the train-fitted normalization."""

    kind: str
    feature_names: Tuple[str, ...]
    params: Dict[str, object]
    threshold_lo: float
    threshold_hi: float
    norm_min: np.ndarray
    norm_max: np.ndarray
    train_seed: int
    train_rows: int
    train_seconds: float = 0.0
    extras: Dict[str, float] = field(default_factory=dict)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        span = self.norm_max - self.norm_min
        span = np.where(span > 0, span, 1.0)
        return (np.asarray(X, dtype=np.float64) - self.norm_min) / span


def train_detector(
    kind: str,
    X_train: np.ndarray,
    feature_names: Sequence[str],
    norm_min: np.ndarray,
    norm_max: np.ndarray,
    seed: int = 0,
    hyper: Optional[dict] = None,
) -> DetectorModel:
    """Fit a scorer on (already normalized) training rows and fit the
    interquartile thresholds on its training scores."""
    if kind not in DETECTOR_KINDS:
        raise ValueError(f"unknown detector kind {kind!r}")
    X = np.asarray(X_train, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise ValueError("X_train shape disagrees with feature_names")
    hp = dict(hyper or {})
    extras: Dict[str, float] = {}
    t0 = time.perf_counter()
    if kind == "autoencoder":
        params, history = fit_autoencoder(
            X,
            hidden=hp.get("hidden"),
            epochs=int(hp.get("epochs", 200)),
            lr=float(hp.get("lr", 1e-3)),
            batch_size=int(hp.get("batch_size", 32)),
            l2=float(hp.get("l2", 0.0)),
            seed=seed,
        )
        extras["loss_first_epoch"] = float(history[0])
        extras["loss_final"] = float(history[-1])
        train_scores = score_autoencoder(params, X)
    elif kind == "lof":
        params = fit_lof(X, k=int(hp.get("k", 15)))
        train_scores = params.pop("train_scores")
    elif kind == "ocsvm":
        params = fit_ocsvm(
            X,
            nu=float(hp.get("nu", 0.1)),
            gamma=float(hp.get("gamma", 0.001)),
            tol=float(hp.get("tol", 1e-4)),
            max_iter=int(hp.get("max_iter", 0)),
        )
        train_scores = params.pop("train_scores")
        extras["kkt_residual"] = float(params["kkt_residual"])
    elif kind == "iforest":
        params = fit_iforest(
            X,
            n_trees=int(hp.get("n_trees", 150)),
            subsample=int(hp.get("subsample", 256)),
            seed=seed,
        )
        train_scores = score_iforest(params, X)
    else:  # copod
        params = fit_copod(X)
        train_scores = score_copod(params, X)
    train_seconds = time.perf_counter() - t0

    lo, hi = fit_iqr_threshold(train_scores)
    return DetectorModel(
        kind=kind,
        feature_names=tuple(feature_names),
        params=params,
        threshold_lo=lo,
        threshold_hi=hi,
        norm_min=np.asarray(norm_min, dtype=np.float64),
        norm_max=np.asarray(norm_max, dtype=np.float64),
        train_seed=int(seed),
        train_rows=int(X.shape[0]),
        train_seconds=train_seconds,
        extras=extras,
    )


def score_matrix(model: DetectorModel, X: np.ndarray) -> np.ndarray:
    """Raw anomaly scores for normalized rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if model.kind == "autoencoder":
        return score_autoencoder(model.params, X)
    if model.kind == "lof":
        return score_lof(model.params, X)
    if model.kind == "ocsvm":
        return score_ocsvm(model.params, X)
    if model.kind == "iforest":
        return score_iforest(model.params, X)
    if model.kind == "copod":
        return score_copod(model.params, X)
    raise ValueError(f"unknown detector kind {model.kind!r}")


def classify(model: DetectorModel, vector: np.ndarray) -> AnomalyVerdict:
    """Verdict for one normalized vector (caller applies model.normalize)."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    if v.size != len(model.feature_names):
        raise ValueError(
            f"vector has {v.size} features, model expects {len(model.feature_names)}"
        )
    score = float(score_matrix(model, v[None, :])[0])
    return verdict_for(score, model.threshold_lo, model.threshold_hi)


def classify_matrix(model: DetectorModel, X: np.ndarray) -> np.ndarray:
    """Boolean anomaly flags for normalized rows (inclusive IQR band)."""
    scores = score_matrix(model, X)
    return (scores < model.threshold_lo) | (scores > model.threshold_hi)
