"""Local outlier factor, novelty flavour.

Training computes each training point's k-distance, local reachability
density, and LOF with the point itself excluded from its own
neighbourhood.  Queries are scored against the full training set.
Duplicate points give zero reachability distances; the mean reach
distance is floored at 1e-10 before inverting, so a query identical to a
duplicated training point comes out at exactly LOF = 1.
"""

from typing import Dict, Tuple

import numpy as np

LRD_FLOOR = 1e-10


def _pairwise_sq(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    d2 = aa + bb - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)


def fit_lof(X: np.ndarray, k: int = 15) -> Dict[str, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("LOF needs at least two training points")
    k = int(min(k, n - 1))
    if k < 1:
        raise ValueError("k must be >= 1")
    D = np.sqrt(_pairwise_sq(X, X))
    np.fill_diagonal(D, np.inf)  # self is never its own neighbour
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
    ndist = np.take_along_axis(D, nbrs, axis=1)
    kdist = ndist[:, -1].copy()
    reach = np.maximum(kdist[nbrs], ndist)
    lrd = 1.0 / np.maximum(reach.mean(axis=1), LRD_FLOOR)
    lof_train = lrd[nbrs].mean(axis=1) / lrd
    return {
        "X": X,
        "k": np.int64(k),
        "kdist": kdist,
        "lrd": lrd,
        "train_scores": lof_train,
    }


def score_lof(params: Dict[str, np.ndarray], Q: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """LOF of query rows against the fitted training set."""
    X = params["X"]
    k = int(params["k"])
    kdist = params["kdist"]
    lrd = params["lrd"]
    Q = np.asarray(Q, dtype=np.float64)
    out = np.empty(Q.shape[0])
    for start in range(0, Q.shape[0], chunk):
        B = Q[start:start + chunk]
        D = np.sqrt(_pairwise_sq(B, X))
        nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
        ndist = np.take_along_axis(D, nbrs, axis=1)
        reach = np.maximum(kdist[nbrs], ndist)
        lrd_q = 1.0 / np.maximum(reach.mean(axis=1), LRD_FLOOR)
        out[start:start + chunk] = lrd[nbrs].mean(axis=1) / lrd_q
    return out
