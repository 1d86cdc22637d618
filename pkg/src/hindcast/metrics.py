"""Rank-statistic metrics: AUROC, AUPRC, prevalence-weighted multi-label AUROC.

AUROC follows the Mann-Whitney convention (ties count one half) and AUPRC
integrates the precision-recall curve step-wise, processing tied scores as a
single block. Degenerate inputs (a single class present) yield an UNDEFINED
value carrying a flag instead of raising, so callers can record and exclude
them from averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SINGLE_CLASS = "single_class"


@dataclass(frozen=True)
class MetricValue:
    """A metric outcome plus the class counts it was computed from.

    ``value`` is None exactly when the slice had no positives or no
    negatives, in which case ``flag`` is set to ``single_class``.
    """

    value: float | None
    n_pos: int
    n_neg: int
    flag: str | None = None

    @property
    def defined(self) -> bool:
        return self.value is not None


def _as_arrays(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1 or s.shape[0] != y.shape[0]:
        raise ValueError("scores and labels must be equal-length vectors")
    if s.shape[0] == 0:
        raise ValueError("empty input")
    return s, y.astype(np.int8)


def _tied_ranks(values):
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = len(values)
    ranks = np.empty(n, dtype=float)
    # boundaries of equal-value runs in the sorted array
    boundary = np.empty(n + 1, dtype=bool)
    boundary[0] = boundary[n] = True
    boundary[1:n] = sorted_vals[1:] != sorted_vals[:-1]
    idx = np.flatnonzero(boundary)
    for start, stop in zip(idx[:-1], idx[1:]):
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
    return ranks


def auroc(scores, labels) -> MetricValue:
    """Area under the ROC curve via the rank-sum identity.

    Equals (wins + 0.5 * ties) / (n_pos * n_neg) over all positive-negative
    pairs; a sort plus tied ranks keeps it O(n log n).
    """
    s, y = _as_arrays(scores, labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        return MetricValue(None, n_pos, n_neg, SINGLE_CLASS)
    ranks = _tied_ranks(s)
    rank_sum = float(np.sum(ranks[y == 1]))
    value = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return MetricValue(value, n_pos, n_neg)


def auprc(scores, labels) -> MetricValue:
    """Area under the precision-recall curve, step-wise, ties as one block."""
    s, y = _as_arrays(scores, labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        return MetricValue(None, n_pos, n_neg, SINGLE_CLASS)
    order = np.argsort(-s, kind="mergesort")
    s_desc = s[order]
    y_desc = y[order]
    tp = np.cumsum(y_desc == 1)
    predicted = np.arange(1, len(s) + 1)
    # keep only the last index of each tie block (thresholds between distinct scores)
    block_end = np.ones(len(s), dtype=bool)
    block_end[:-1] = s_desc[:-1] != s_desc[1:]
    tp = tp[block_end].astype(float)
    predicted = predicted[block_end].astype(float)
    precision = tp / predicted
    recall = tp / n_pos
    recall_prev = np.concatenate([[0.0], recall[:-1]])
    value = float(np.sum((recall - recall_prev) * precision))
    return MetricValue(value, n_pos, n_neg)


def prevalence(labels) -> float:
    """Fraction of positive labels."""
    y = np.asarray(labels, dtype=float)
    if y.size == 0:
        raise ValueError("empty input")
    return float(np.mean(y))


def weighted_multilabel_auroc(scores, labels) -> MetricValue:
    """Positive-count-weighted mean of per-label AUROCs.

    ``scores`` and ``labels`` are (n, L) matrices of independent binary
    tasks. Each label's weight is its positive count over the total positive
    count; labels whose AUROC is undefined are dropped and the weights are
    renormalized over the remaining ones.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim == 1:
        s = s[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if s.ndim != 2 or s.shape != y.shape:
        raise ValueError("scores and labels must be matching n x L matrices")
    per_label = [auroc(s[:, j], y[:, j]) for j in range(s.shape[1])]
    defined = [(m.n_pos, m.value) for m in per_label if m.defined]
    n_pos_total = int(sum(int(np.sum(y[:, j] == 1)) for j in range(y.shape[1])))
    n_neg_total = int(y.size - n_pos_total)
    if not defined:
        return MetricValue(None, n_pos_total, n_neg_total, SINGLE_CLASS)
    weight_mass = float(sum(p for p, _ in defined))
    if weight_mass == 0.0:
        return MetricValue(None, n_pos_total, n_neg_total, SINGLE_CLASS)
    value = float(sum(p * v for p, v in defined) / weight_mass)
    return MetricValue(value, n_pos_total, n_neg_total)


METRIC_FUNCS = {
    "auroc": auroc,
    "auprc": auprc,
}
