"""Shared fixtures and independent oracles used across the suite."""

import numpy as np
import pytest

from hindcast.dataset import ColumnSpec, build_dataset


def pairwise_auroc_oracle(scores, labels):
    """Brute-force Mann-Whitney statistic over all positive-negative pairs."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return None
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def sweep_auprc_oracle(scores, labels):
    """Exhaustive PR sweep: recount precision/recall at each distinct score."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0 or n_pos == len(labels):
        return None
    thresholds = np.unique(scores)[::-1]
    area = 0.0
    prev_recall = 0.0
    for thr in thresholds:
        predicted = scores >= thr
        tp = int(np.sum((labels == 1) & predicted))
        precision = tp / int(np.sum(predicted))
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def toy_columns(n=12, seed=0, t_values=("2001", "2002", "2003")):
    """Raw string columns for a small mixed-type dataset."""
    rng = np.random.default_rng(seed)
    cols = {
        "when": [t_values[i % len(t_values)] for i in range(n)],
        "age": [f"{v:.3f}" if i % 5 else "" for i, v in enumerate(rng.normal(50, 10, n))],
        "stage": [["I", "II", "III", ""][i % 4] for i in range(n)],
        "outcome": [str(int(v)) for v in rng.integers(0, 2, n)],
    }
    return cols


def toy_schema():
    return (
        ColumnSpec("when", "time"),
        ColumnSpec("age", "numerical"),
        ColumnSpec("stage", "categorical"),
        ColumnSpec("outcome", "label"),
    )


@pytest.fixture
def toy_dataset():
    return build_dataset(toy_schema(), toy_columns(n=24))


def random_temporal_dataset(rng, n_time=4, rows_per_t=(6, 20), grouped=False,
                            n_labels=1):
    """A randomized dataset for property tests."""
    cols = {"when": [], "x": [], "c": [], "outcome": []}
    schema = [
        ColumnSpec("when", "time"),
        ColumnSpec("x", "numerical"),
        ColumnSpec("c", "categorical"),
        ColumnSpec("outcome", "label"),
    ]
    if n_labels > 1:
        for j in range(1, n_labels):
            schema.append(ColumnSpec(f"outcome{j}", "label"))
            cols[f"outcome{j}"] = []
    if grouped:
        schema.append(ColumnSpec("who", "group_key"))
        cols["who"] = []
    for t in range(n_time):
        n = int(rng.integers(rows_per_t[0], rows_per_t[1] + 1))
        for _ in range(n):
            cols["when"].append(str(2000 + t))
            cols["x"].append(f"{rng.normal():.4f}" if rng.random() > 0.1 else "")
            cols["c"].append(["a", "b", "c", ""][int(rng.integers(0, 4))])
            cols["outcome"].append(str(int(rng.integers(0, 2))))
            for j in range(1, n_labels):
                cols[f"outcome{j}"].append(str(int(rng.integers(0, 2))))
            if grouped:
                cols["who"].append(f"g{int(rng.integers(0, max(n // 2, 2)))}")
    return build_dataset(tuple(schema), cols)
