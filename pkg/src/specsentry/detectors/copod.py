"""Copula-style tail-probability scorer.

Per feature the model keeps the sorted training column and the sign of
the sample skewness.  A query's score sums, over features, the negative
log of the empirical tail probability on the side the skewness selects
(left tail for negatively skewed features, right tail otherwise).  Tail
probabilities are floored at 1/(n+1) so values beyond the training
range stay finite and maximal.
"""

from typing import Dict

import numpy as np


def sample_skewness(X: np.ndarray) -> np.ndarray:
    """Plain m3 / m2^1.5 per column; zero-variance columns give 0."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    d = X - mu
    m2 = (d ** 2).mean(axis=0)
    m3 = (d ** 3).mean(axis=0)
    out = np.zeros(X.shape[1])
    ok = m2 > 0
    out[ok] = m3[ok] / np.power(m2[ok], 1.5)
    return out


def fit_copod(X: np.ndarray) -> Dict[str, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 1:
        raise ValueError("empty training set")
    return {
        "sorted_cols": np.sort(X, axis=0),
        "skew_sign": np.sign(sample_skewness(X)),
        "n": np.int64(X.shape[0]),
    }


def score_copod(params: Dict[str, np.ndarray], Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    cols = params["sorted_cols"]
    n = int(params["n"])
    skew_sign = params["skew_sign"]
    floor = 1.0 / (n + 1.0)
    out = np.zeros(Q.shape[0])
    for j in range(cols.shape[1]):
        col = cols[:, j]
        left = np.searchsorted(col, Q[:, j], side="right") / n
        right = (n - np.searchsorted(col, Q[:, j], side="left")) / n
        tail = left if skew_sign[j] < 0 else right
        out += -np.log(np.clip(tail, floor, 1.0))
    return out
