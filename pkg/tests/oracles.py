"""Hand-rolled reference implementations backing the test suite.

Everything in this module trades speed for obviousness: scalar loops,
sorted lists, and textbook formulas, written directly from the
documented contracts rather than from the library code. Tests compare
the library against these references, never the other way around.

A "trace" below is a list of scan cycles, each cycle a flat list of
float PSD values (one per bin). Band arguments are lists of flat bin
indices in ascending order. The stream transformers return a full
output trace; bins outside the bands they describe are copied through
untouched, which is itself part of the contract under test.
"""

import math

import numpy as np


# ---------------------------------------------------------------------------
# falsification stream references


def _clone(trace):
    return [list(cycle) for cycle in trace]


def repeat_trace(trace, attacked, source):
    """Snapshot the source band on the first cycle, replay it forever.

    On cycle 1 the attacked band is only substituted when the source
    band sits earlier in the sweep (so the snapshot already exists when
    the sweep reaches it). A narrower snapshot tiles across a wider
    attacked band.
    """
    source_first = source[0] < attacked[0]
    snapshot = [trace[0][b] for b in source]
    out = _clone(trace)
    for t in range(len(trace)):
        if t == 0 and not source_first:
            continue
        for i, b in enumerate(attacked):
            out[t][b] = snapshot[i % len(snapshot)]
    return out


def mimic_trace(trace, attacked, source):
    """Copy the source band into the attacked band, cycle by cycle.

    Paired bin i of the attacked band carries source bin i from the
    same cycle when the source is swept first, otherwise from the
    previous cycle (and passes through unmodified on cycle 1).
    """
    if len(attacked) != len(source):
        raise ValueError("bands must pair up")
    source_first = source[0] < attacked[0]
    out = _clone(trace)
    for t in range(len(trace)):
        if source_first:
            recorded = [trace[t][b] for b in source]
        elif t >= 1:
            recorded = [trace[t - 1][b] for b in source]
        else:
            continue
        for i, b in enumerate(attacked):
            out[t][b] = recorded[i]
    return out


def confusion_trace(trace, x_band, y_band):
    """Swap two equal-size bands; cycle 1 only primes the recordings.

    Sweeping low to high, the lower band is substituted before the
    higher band re-records, so the lower band sees the higher band's
    previous cycle while the higher band sees the lower band's current
    one.
    """
    if len(x_band) != len(y_band):
        raise ValueError("bands must pair up")
    lower, upper = (x_band, y_band) if x_band[0] < y_band[0] else (y_band, x_band)
    out = _clone(trace)
    for t in range(1, len(trace)):
        for i, b in enumerate(lower):
            out[t][b] = trace[t - 1][upper[i]]
        for i, b in enumerate(upper):
            out[t][b] = trace[t][lower[i]]
    return out


def freeze_trace(trace, attacked):
    """Record the attacked band on cycle 1 and replay it afterwards."""
    out = _clone(trace)
    for t in range(1, len(trace)):
        for b in attacked:
            out[t][b] = trace[0][b]
    return out


def delay_trace(trace, attacked, delay_cycles):
    """Queue the attacked band and emit it delay_cycles sweeps late.

    While the queue is still filling the band passes through
    unmodified; afterwards the output at cycle t is the input at cycle
    t - delay_cycles.
    """
    if delay_cycles < 1:
        raise ValueError("delay must cover at least one cycle")
    out = _clone(trace)
    for t in range(len(trace)):
        if t + 1 > delay_cycles:
            for b in attacked:
                out[t][b] = trace[t - delay_cycles][b]
    return out


def band_bins_by_hand(start_hz, n_bins, bin_width_hz, center_hz, bandwidth_hz):
    """Flat indices of every bin whose support overlaps the band.

    Bins are half-open [start, start + width); touching at an edge is
    not overlap. Plain linear scan over the whole grid.
    """
    lo = center_hz - bandwidth_hz / 2.0
    hi = center_hz + bandwidth_hz / 2.0
    hits = []
    for i in range(n_bins):
        b0 = start_hz + i * bin_width_hz
        b1 = b0 + bin_width_hz
        if b1 > lo and b0 < hi:
            hits.append(i)
    return hits


# ---------------------------------------------------------------------------
# thresholding


def quartile_by_hand(values, q):
    """Linear-interpolation quantile of a sequence, computed by hand."""
    v = sorted(float(x) for x in values)
    if len(v) == 1:
        return v[0]
    pos = (len(v) - 1) * q
    lo = math.floor(pos)
    hi = math.ceil(pos)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def iqr_bounds_by_hand(values):
    """(lower, upper) fence at 1.5 interquartile ranges beyond Q1/Q3."""
    q1 = quartile_by_hand(values, 0.25)
    q3 = quartile_by_hand(values, 0.75)
    spread = q3 - q1
    return q1 - 1.5 * spread, q3 + 1.5 * spread


# ---------------------------------------------------------------------------
# local outlier factor, straight from the textbook definition


def lof_by_hand(X, k):
    """O(n^2) local outlier factor of every row against the others.

    Neighbourhoods contain every point within the k-distance, so ties
    expand them beyond k members (with continuous random data that
    never happens and the result matches a fixed-k implementation).
    """
    X = [list(map(float, row)) for row in X]
    n = len(X)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for a, b in zip(X[i], X[j]):
                s += (a - b) * (a - b)
            d[i][j] = d[j][i] = math.sqrt(s)

    kdist = [0.0] * n
    neigh = [None] * n
    for i in range(n):
        others = sorted(d[i][j] for j in range(n) if j != i)
        kdist[i] = others[k - 1]
        neigh[i] = [j for j in range(n) if j != i and d[i][j] <= kdist[i]]

    lrd = [0.0] * n
    for i in range(n):
        total = 0.0
        for j in neigh[i]:
            total += max(kdist[j], d[i][j])
        mean_reach = total / len(neigh[i])
        lrd[i] = math.inf if mean_reach == 0.0 else 1.0 / mean_reach

    lof = [0.0] * n
    for i in range(n):
        acc = 0.0
        for j in neigh[i]:
            acc += lrd[j]
        lof[i] = (acc / len(neigh[i])) / lrd[i]
    return lof


# ---------------------------------------------------------------------------
# gradient checking


def central_difference(loss_fn, params, key, flat_index, h=1e-6):
    """Two-sided finite-difference derivative of loss_fn at one weight."""
    plus = {k: v.copy() for k, v in params.items()}
    minus = {k: v.copy() for k, v in params.items()}
    plus[key].flat[flat_index] += h
    minus[key].flat[flat_index] -= h
    return (loss_fn(plus) - loss_fn(minus)) / (2.0 * h)


# ---------------------------------------------------------------------------
# one-class SVM dual, solved by a generic QP solver


def ocsvm_qp_reference(X, nu, gamma):
    """Solve the one-class dual with cvxopt and derive decision values.

        min 1/2 a' K a   s.t.  0 <= a_i <= 1/(nu n),  sum a = 1

    Returns (alpha, rho, decisions) where decisions[i] is the signed
    decision value of training row i. The kernel is built with explicit
    squared differences, independent of the library's algebra.
    """
    from cvxopt import matrix, solvers

    X = [list(map(float, row)) for row in X]
    n = len(X)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for a, b in zip(X[i], X[j]):
                s += (a - b) * (a - b)
            K[i, j] = math.exp(-gamma * s)

    C = 1.0 / (nu * n)
    P = matrix(K)
    q = matrix(np.zeros(n))
    G = matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = matrix(np.concatenate([np.zeros(n), np.full(n, C)]))
    A = matrix(np.ones((1, n)))
    b = matrix(np.array([1.0]))
    opts = {"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12}
    sol = solvers.qp(P, q, G, h, A, b, options=opts)
    alpha = np.asarray(sol["x"]).reshape(-1)

    decision_raw = K @ alpha
    free = (alpha > 1e-6 * C) & (alpha < C * (1.0 - 1e-6))
    if free.any():
        rho = float(decision_raw[free].mean())
    else:
        rho = float(decision_raw[alpha > 1e-6 * C].min())
    return alpha, rho, decision_raw - rho
