"""Dense autoencoder anomaly scorer.

One rectifier hidden layer, linear output, trained with mini-batch
gradient descent on mean squared reconstruction error.  The anomaly
score of a vector is its per-row reconstruction MSE.  Gradients are
analytic; ``loss_and_grads`` is exposed so they can be checked against
finite differences.
"""

from typing import Dict, Optional, Tuple

import numpy as np

from specsentry._rand import rng_for


def init_params(n_features: int, hidden: int, seed: int) -> Dict[str, np.ndarray]:
    rng = rng_for(seed, "ae-init")
    lim1 = np.sqrt(6.0 / (n_features + hidden))
    lim2 = np.sqrt(6.0 / (hidden + n_features))
    return {
        "W1": rng.uniform(-lim1, lim1, size=(n_features, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.uniform(-lim2, lim2, size=(hidden, n_features)),
        "b2": np.zeros(n_features),
    }


def _forward(params, X):
    Z = X @ params["W1"] + params["b1"]
    H = np.maximum(Z, 0.0)
    Y = H @ params["W2"] + params["b2"]
    return Z, H, Y


def loss_and_grads(params: Dict[str, np.ndarray], X: np.ndarray, l2: float = 0.0):
    """Mean squared reconstruction error and its analytic gradients."""
    n, d = X.shape
    Z, H, Y = _forward(params, X)
    R = Y - X
    loss = float((R * R).mean())
    if l2:
        loss += 0.5 * l2 * (float((params["W1"] ** 2).sum()) + float((params["W2"] ** 2).sum()))
    dY = 2.0 * R / (n * d)
    gW2 = H.T @ dY
    gb2 = dY.sum(axis=0)
    dH = dY @ params["W2"].T
    dZ = dH * (Z > 0.0)
    gW1 = X.T @ dZ
    gb1 = dZ.sum(axis=0)
    if l2:
        gW1 = gW1 + l2 * params["W1"]
        gW2 = gW2 + l2 * params["W2"]
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def fit_autoencoder(
    X: np.ndarray,
    hidden: Optional[int] = None,
    epochs: int = 200,
    lr: float = 1e-3,
    batch_size: int = 32,
    l2: float = 0.0,
    seed: int = 0,
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Returns (params, per-epoch mean training loss)."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    h = int(hidden) if hidden is not None else d
    params = init_params(d, h, seed)
    order_rng = rng_for(seed, "ae-batches")
    history = np.empty(epochs)
    for epoch in range(epochs):
        perm = order_rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            batch = X[perm[start:start + batch_size]]
            loss, grads = loss_and_grads(params, batch, l2=l2)
            losses.append(loss)
            for key in params:
                params[key] = params[key] - lr * grads[key]
        history[epoch] = float(np.mean(losses))
    return params, history


def score_autoencoder(params: Dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _, _, Y = _forward(params, X)
    R = Y - X
    return (R * R).mean(axis=1)
