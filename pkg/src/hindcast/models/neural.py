"""Single-hidden-layer network trained with plain mini-batch SGD.

Architecture: ReLU hidden layer, sigmoid output, binary cross-entropy loss.
Fixed schedule: batch size 128, at most 200 epochs, constant step size, and
an early stop once the epoch-end training loss has improved by less than
1e-5 for 10 consecutive epochs. The seed fixes both the Glorot-uniform
initialization and the per-epoch shuffles.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateLabelError, DivergenceError, ShapeError
from .base import TrainedModel
from .linear import sigmoid

BATCH_SIZE = 128
MAX_EPOCHS = 200
PLATEAU_EPS = 1e-5
PLATEAU_EPOCHS = 10


def _init_params(n_features, hidden, rng):
    limit1 = np.sqrt(6.0 / (n_features + hidden))
    limit2 = np.sqrt(6.0 / (hidden + 1))
    return {
        "W1": rng.uniform(-limit1, limit1, size=(n_features, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.uniform(-limit2, limit2, size=hidden),
        "b2": 0.0,
    }


def mlp_forward(params, X):
    pre = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    margin = hidden @ params["W2"] + params["b2"]
    return pre, hidden, margin


def mlp_loss(params, X, y):
    _, _, margin = mlp_forward(params, X)
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def mlp_loss_and_grads(params, X, y):
    """Loss and analytic gradients; exposed for finite-difference checks."""
    n = X.shape[0]
    pre, hidden, margin = mlp_forward(params, X)
    p = sigmoid(margin)
    loss = float(np.mean(np.logaddexp(0.0, margin) - y * margin))
    dmargin = (p - y) / n
    grads = {
        "W2": hidden.T @ dmargin,
        "b2": float(np.sum(dmargin)),
    }
    dhidden = np.outer(dmargin, params["W2"])
    dpre = dhidden * (pre > 0.0)
    grads["W1"] = X.T @ dpre
    grads["b1"] = dpre.sum(axis=0)
    return loss, grads


def fit_mlp(X, y, hidden_layer_size, learning_rate_init, seed=0,
            max_epochs=MAX_EPOCHS, batch_size=BATCH_SIZE) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if np.unique(y).size < 2:
        raise DegenerateLabelError("training labels contain a single class")
    if hidden_layer_size < 1 or learning_rate_init <= 0:
        raise ValueError("invalid MLP hyperparameters")

    rng = np.random.default_rng(seed)
    params = _init_params(X.shape[1], hidden_layer_size, rng)
    n = X.shape[0]
    best_loss = np.inf
    stale_epochs = 0
    epoch = 0
    loss = mlp_loss(params, X, y)
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            _, grads = mlp_loss_and_grads(params, X[batch], y[batch])
            params["W1"] = params["W1"] - learning_rate_init * grads["W1"]
            params["b1"] = params["b1"] - learning_rate_init * grads["b1"]
            params["W2"] = params["W2"] - learning_rate_init * grads["W2"]
            params["b2"] = params["b2"] - learning_rate_init * grads["b2"]
        loss = mlp_loss(params, X, y)
        if not np.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}")
        if best_loss - loss < PLATEAU_EPS:
            stale_epochs += 1
            if stale_epochs >= PLATEAU_EPOCHS:
                break
        else:
            stale_epochs = 0
        best_loss = min(best_loss, loss)

    return TrainedModel(
        family="mlp",
        hyperparameters={
            "hidden_layer_size": int(hidden_layer_size),
            "learning_rate_init": float(learning_rate_init),
        },
        feature_names=None,
        params={k: (v.copy() if isinstance(v, np.ndarray) else float(v))
                for k, v in params.items()},
        metadata={
            "seed": int(seed),
            "iterations": int(epoch),
            "final_objective": float(loss),
        },
    )


def predict_mlp(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    W1 = model.params["W1"]
    if X.ndim != 2 or X.shape[1] != W1.shape[0]:
        raise ShapeError(f"expected {W1.shape[0]} features, got {X.shape}")
    _, _, margin = mlp_forward(model.params, X)
    return sigmoid(margin)


def importance_mlp(model: TrainedModel) -> np.ndarray:
    """Mean absolute first-layer weight per input feature."""
    return np.mean(np.abs(model.params["W1"]), axis=1)
