"""Isolation forest.

Trees are grown on subsamples drawn without replacement (256 by
default), splitting a uniformly chosen feature at a uniform point
between its subsample min and max, down to the standard height limit
ceil(log2 subsample).  The score is 2^(-E[h]/c(psi)); a degenerate
training set (c(psi) = 0, e.g. a single row) scores 0.5 everywhere by
convention.
"""

import math
from typing import Dict, List

import numpy as np

from specsentry._rand import rng_for

_EULER = 0.5772156649015329


def average_path_length(n) -> np.ndarray:
    """c(n): expected unsuccessful-search path length in a BST of n points."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    out[n == 2] = 1.0
    big = n > 2
    nb = n[big]
    out[big] = 2.0 * (np.log(nb - 1.0) + _EULER) - 2.0 * (nb - 1.0) / nb
    return out


class _TreeBuilder:
    __slots__ = ("feature", "threshold", "left", "right", "size")

    def __init__(self):
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.size: List[int] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(0)
        return len(self.feature) - 1


def _grow(tb: _TreeBuilder, X: np.ndarray, depth: int, limit: int, rng) -> int:
    node = tb.add()
    tb.size[node] = X.shape[0]
    if depth >= limit or X.shape[0] <= 1:
        return node
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    splittable = np.nonzero(hi > lo)[0]
    if splittable.size == 0:
        return node
    f = int(rng.choice(splittable))
    thr = float(rng.uniform(lo[f], hi[f]))
    mask = X[:, f] < thr
    if not mask.any() or mask.all():
        return node
    tb.feature[node] = f
    tb.threshold[node] = thr
    tb.left[node] = _grow(tb, X[mask], depth + 1, limit, rng)
    tb.right[node] = _grow(tb, X[~mask], depth + 1, limit, rng)
    return node


def fit_iforest(
    X: np.ndarray, n_trees: int = 150, subsample: int = 256, seed: int = 0
) -> Dict[str, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 1:
        raise ValueError("empty training set")
    psi = int(min(subsample, n))
    limit = max(1, int(math.ceil(math.log2(max(psi, 2)))))
    trees = []
    for t in range(n_trees):
        rng = rng_for(seed, "iforest-tree", t)
        idx = rng.choice(n, size=psi, replace=False) if psi < n else np.arange(n)
        tb = _TreeBuilder()
        _grow(tb, X[idx], 0, limit, rng)
        trees.append({
            "feature": np.asarray(tb.feature, dtype=np.int64),
            "threshold": np.asarray(tb.threshold, dtype=np.float64),
            "left": np.asarray(tb.left, dtype=np.int64),
            "right": np.asarray(tb.right, dtype=np.int64),
            "size": np.asarray(tb.size, dtype=np.int64),
        })
    c_psi = float(average_path_length(np.array([psi]))[0])
    return {"trees": trees, "psi": np.int64(psi), "c_psi": np.float64(c_psi),
            "height_limit": np.int64(limit)}


def _tree_depths(tree, X: np.ndarray, limit: int) -> np.ndarray:
    n = X.shape[0]
    cur = np.zeros(n, dtype=np.int64)
    depth = np.zeros(n, dtype=np.float64)
    rows = np.arange(n)
    for _ in range(limit + 1):
        feat = tree["feature"][cur]
        internal = feat >= 0
        if not internal.any():
            break
        fi = np.where(internal, feat, 0)
        go_left = X[rows, fi] < tree["threshold"][cur]
        nxt = np.where(go_left, tree["left"][cur], tree["right"][cur])
        cur = np.where(internal, nxt, cur)
        depth += internal
    leaf_size = tree["size"][cur]
    return depth + average_path_length(leaf_size)


def score_iforest(params: Dict[str, np.ndarray], Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    c_psi = float(params["c_psi"])
    if c_psi <= 0.0:
        return np.full(Q.shape[0], 0.5)
    limit = int(params["height_limit"])
    acc = np.zeros(Q.shape[0])
    for tree in params["trees"]:
        acc += _tree_depths(tree, Q, limit)
    mean_h = acc / len(params["trees"])
    return np.power(2.0, -mean_h / c_psi)
