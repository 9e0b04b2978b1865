"""Interquartile-rule thresholding shared by every detector.

Quartiles use linear interpolation of order statistics (the numpy
default).  Scores inside [Q1 - 1.5*IQR, Q3 + 1.5*IQR] inclusive are
normal; anything outside on either side is anomalous.  A constant score
vector collapses the band to a point, which still behaves: equal scores
are normal, anything else is not.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np


def fit_iqr_threshold(scores) -> Tuple[float, float]:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no scores to threshold")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    q1, q3 = np.quantile(s, [0.25, 0.75])
    iqr = q3 - q1
    return float(q1 - 1.5 * iqr), float(q3 + 1.5 * iqr)


@dataclass(frozen=True)
class AnomalyVerdict:
    score: float
    lo: float
    hi: float
    anomalous: bool
    side: str  # "below", "within", "above"


def verdict_for(score: float, lo: float, hi: float) -> AnomalyVerdict:
    """Inclusive band: score == lo or score == hi is still normal."""
    if score < lo:
        side = "below"
    elif score > hi:
        side = "above"
    else:
        side = "within"
    return AnomalyVerdict(score=float(score), lo=float(lo), hi=float(hi),
                          anomalous=side != "within", side=side)
