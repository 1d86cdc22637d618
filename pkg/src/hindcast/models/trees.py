"""Gradient-boosted regression trees on the logistic loss.

Stagewise boosting with exact greedy splits on gradient/hessian sums. Leaf
values are damped Newton steps -G / (H + lambda) with lambda fixed at 1.0;
zero-gain splits are accepted (best gain >= 0) so patterns like XOR, where
every first-level split is gain-neutral, still get separated at depth 2.
Ties between candidate splits resolve to the lowest feature index, then the
lowest threshold, which keeps trees deterministic.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateLabelError, ShapeError
from .base import TrainedModel
from .linear import sigmoid

LEAF_LAMBDA = 1.0

# node encoding: internal (feature, threshold, left, right, gain),
# leaf (-1, value, -1, -1, 0.0)


def _logit(p):
    return float(np.log(p / (1.0 - p)))


def _best_split(X, g, h, rows):
    """Exact greedy split over all features; returns (gain, feature, threshold)."""
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    parent = G * G / (H + LEAF_LAMBDA)
    best = None
    for f in range(X.shape[1]):
        xs = X[rows, f]
        order = np.argsort(xs, kind="mergesort")
        xs_sorted = xs[order]
        g_sorted = g[rows][order]
        h_sorted = h[rows][order]
        g_cum = np.cumsum(g_sorted)
        h_cum = np.cumsum(h_sorted)
        # a split is valid after position i only if the value changes there
        changes = np.flatnonzero(xs_sorted[:-1] < xs_sorted[1:])
        if changes.size == 0:
            continue
        gl = g_cum[changes]
        hl = h_cum[changes]
        gr = G - gl
        hr = H - hl
        gains = 0.5 * (gl * gl / (hl + LEAF_LAMBDA) + gr * gr / (hr + LEAF_LAMBDA) - parent)
        local = int(np.argmax(gains))
        gain = float(gains[local])
        threshold = 0.5 * (xs_sorted[changes[local]] + xs_sorted[changes[local] + 1])
        if best is None or gain > best[0] + 1e-15:
            best = (gain, f, float(threshold))
    return best


def _grow_tree(X, g, h, rows, depth, max_depth, nodes):
    """Append nodes depth-first; returns the new node's index."""
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    if depth >= max_depth or rows.size < 2:
        nodes.append((-1, -G / (H + LEAF_LAMBDA), -1, -1, 0.0))
        return len(nodes) - 1
    best = _best_split(X, g, h, rows)
    if best is None or best[0] < 0.0:
        nodes.append((-1, -G / (H + LEAF_LAMBDA), -1, -1, 0.0))
        return len(nodes) - 1
    gain, f, threshold = best
    nodes.append(None)  # placeholder until children are known
    index = len(nodes) - 1
    mask = X[rows, f] <= threshold
    left = _grow_tree(X, g, h, rows[mask], depth + 1, max_depth, nodes)
    right = _grow_tree(X, g, h, rows[~mask], depth + 1, max_depth, nodes)
    nodes[index] = (f, threshold, left, right, gain)
    return index


def _tree_predict(nodes, root, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = nodes[root]
        while node[0] != -1:
            node = nodes[node[2]] if X[i, node[0]] <= node[1] else nodes[node[3]]
        out[i] = node[1]
    return out


def fit_gbdt(X, y, n_estimators, max_depth, learning_rate, seed=0) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if np.unique(y).size < 2:
        raise DegenerateLabelError("training labels contain a single class")
    if n_estimators < 1 or max_depth < 1 or learning_rate <= 0:
        raise ValueError("invalid GBDT hyperparameters")

    base_score = _logit(float(np.mean(y)))
    F = np.full(X.shape[0], base_score)
    all_rows = np.arange(X.shape[0])
    trees = []
    losses = []
    for _ in range(n_estimators):
        p = sigmoid(F)
        g = p - y
        h = np.maximum(p * (1.0 - p), 1e-16)
        nodes = []
        root = _grow_tree(X, g, h, all_rows, 0, max_depth, nodes)
        trees.append({"nodes": nodes, "root": root})
        F = F + learning_rate * _tree_predict(nodes, root, X)
        losses.append(float(np.mean(np.logaddexp(0.0, F) - y * F)))

    return TrainedModel(
        family="gbdt",
        hyperparameters={
            "n_estimators": int(n_estimators),
            "max_depth": int(max_depth),
            "learning_rate": float(learning_rate),
        },
        feature_names=None,
        params={"base_score": base_score, "trees": trees, "n_features": int(X.shape[1])},
        metadata={
            "seed": int(seed),
            "iterations": int(n_estimators),
            "final_objective": losses[-1],
            "stage_losses": losses,
        },
    )


def _margin_gbdt(model: TrainedModel, X) -> np.ndarray:
    lr = model.hyperparameters["learning_rate"]
    F = np.full(X.shape[0], model.params["base_score"])
    for tree in model.params["trees"]:
        F += lr * _tree_predict(tree["nodes"], tree["root"], X)
    return F


def predict_gbdt(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    width = int(model.params["n_features"])
    if X.ndim != 2 or X.shape[1] != width:
        raise ShapeError(f"expected {width} features, got {X.shape}")
    return sigmoid(_margin_gbdt(model, X))


def importance_gbdt(model: TrainedModel) -> np.ndarray:
    """Total split gain per feature across all trees."""
    gains = np.zeros(int(model.params["n_features"]))
    for tree in model.params["trees"]:
        for node in tree["nodes"]:
            if node[0] != -1:
                gains[int(node[0])] += float(node[4])
    return gains
