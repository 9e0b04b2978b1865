"""One-class SVM with an RBF kernel, trained by SMO.

Solves the one-class dual

    min  1/2 a' Q a   s.t.  0 <= a_i <= 1/(nu n),  sum a = 1,
    Q_ij = exp(-gamma ||x_i - x_j||^2)

with maximal-violating-pair working set selection.  The offset rho is
the gradient value on free support vectors (midpoint of the KKT bracket
when none are free), the decision value of a point is
sum_i a_i K(x_i, x) - rho, and the reported KKT residual is the final
violating-pair gap, so convergence quality is visible to callers.
"""

from typing import Dict

import numpy as np

_BOX_EPS_REL = 1e-8
_TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    d2 = np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


def fit_ocsvm(
    X: np.ndarray,
    nu: float = 0.1,
    gamma: float = 0.001,
    tol: float = 1e-4,
    max_iter: int = 0,
) -> Dict[str, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must be in (0, 1]")
    if n < 2:
        raise ValueError("need at least two training points")
    if n > 8000:
        raise ValueError("training set too large for a dense SMO solve; subsample first")
    C = 1.0 / (nu * n)
    box_eps = C * _BOX_EPS_REL
    if max_iter <= 0:
        max_iter = max(200_000, 80 * n)

    K = rbf_kernel(X, X, gamma)

    # libsvm-style start: pack the budget into the first floor(nu*n) slots
    alpha = np.zeros(n)
    n_full = int(nu * n)
    alpha[:n_full] = C
    rest = 1.0 - n_full * C
    if rest > 0 and n_full < n:
        alpha[n_full] = rest
    G = K @ alpha

    residual = np.inf
    for _ in range(max_iter):
        up = alpha < C - box_eps
        low = alpha > box_eps
        Gi = np.where(up, G, np.inf)
        Gj = np.where(low, G, -np.inf)
        i = int(np.argmin(Gi))
        j = int(np.argmax(Gj))
        residual = float(Gj[j] - Gi[i])
        if residual < tol:
            break
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0:
            a = _TAU
        delta = (G[j] - G[i]) / a
        delta = min(delta, C - alpha[i], alpha[j])
        if delta <= 0:
            break
        alpha[i] += delta
        alpha[j] -= delta
        G += delta * (K[:, i] - K[:, j])

    free = (alpha > box_eps) & (alpha < C - box_eps)
    if free.any():
        rho = float(G[free].mean())
    else:
        upper = G[alpha >= C - box_eps]
        lower = G[alpha <= box_eps]
        hi = upper.max() if upper.size else -np.inf
        lo = lower.min() if lower.size else np.inf
        if np.isfinite(hi) and np.isfinite(lo):
            rho = float((hi + lo) / 2.0)
        else:
            rho = float(hi if np.isfinite(hi) else lo)

    sv = alpha > box_eps
    return {
        "support": X[sv],
        "alpha": alpha[sv],
        "rho": np.float64(rho),
        "gamma": np.float64(gamma),
        "nu": np.float64(nu),
        "kkt_residual": np.float64(max(residual, 0.0)),
        "train_scores": G - rho,
    }


def score_ocsvm(params: Dict[str, np.ndarray], Q: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Signed decision values; negative means outside the learned region."""
    Q = np.asarray(Q, dtype=np.float64)
    sv = params["support"]
    alpha = params["alpha"]
    gamma = float(params["gamma"])
    rho = float(params["rho"])
    out = np.empty(Q.shape[0])
    for start in range(0, Q.shape[0], chunk):
        B = Q[start:start + chunk]
        out[start:start + chunk] = rbf_kernel(B, sv, gamma) @ alpha - rho
    return out
