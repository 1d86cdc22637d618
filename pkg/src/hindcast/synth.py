"""Deterministic generator of temporally drifting binary-outcome datasets.

Labels follow a logistic model over the blocks active at each time point:
y ~ Bernoulli(sigmoid(sum_b beta_b . x_b + c_t)). Block cells are missing
outside the block's active interval, per-time-point row counts follow a
clipped sinusoid, and the intercept c_t is solved by bisection so the
realized expected prevalence matches the schedule. The manifest records the
true coefficients, intercepts and activity intervals, which makes the Bayes
score sigmoid(beta . x + c_t) available as an independent oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import CATEGORICAL, LABEL, NUMERICAL, TIME, ColumnSpec, build_dataset
from .errors import ConfigError
from .models.linear import sigmoid


@dataclass(frozen=True)
class FeatureBlock:
    name: str
    kind: str                  # categorical | numerical
    width: int
    strength: float            # sd of the block's logit contribution while active
    t_on: int
    t_off: int

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERICAL):
            raise ConfigError(f"block {self.name!r}: kind must be categorical or numerical")
        if self.width < 1:
            raise ConfigError(f"block {self.name!r}: width must be >= 1")
        if self.strength < 0:
            raise ConfigError(f"block {self.name!r}: strength must be >= 0")


@dataclass(frozen=True)
class DriftSpec:
    T: int
    base_rows: int
    blocks: tuple
    prevalence: tuple          # scheduled positive rate per time point, length T
    seasonal_amplitude: float = 0.0
    seasonal_period: float = 12.0
    min_rows: int = 30
    noise_features: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.T < 2:
            raise ConfigError("T must be >= 2")
        if self.base_rows < 1:
            raise ConfigError("base_rows must be >= 1")
        if not 0.0 <= self.seasonal_amplitude < 1.0:
            raise ConfigError("seasonal_amplitude must be in [0, 1)")
        if self.seasonal_period <= 0:
            raise ConfigError("seasonal_period must be positive")
        if len(self.prevalence) != self.T:
            raise ConfigError(f"prevalence schedule must have {self.T} entries")
        for t, p in enumerate(self.prevalence, start=1):
            if not 0.0 < p < 1.0:
                raise ConfigError(f"prevalence at t={t} must be in (0, 1)")
        for b in self.blocks:
            if not 1 <= b.t_on <= b.t_off <= self.T:
                raise ConfigError(
                    f"block {b.name!r}: active interval [{b.t_on}, {b.t_off}] "
                    f"violates 1 <= t_on <= t_off <= {self.T}"
                )
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ConfigError("block names must be unique")


def _block_betas(block: FeatureBlock):
    """Coefficients scaled so the active logit contribution has sd strength."""
    if block.width == 1:
        pattern = np.array([1.0])
    else:
        pattern = np.linspace(-1.0, 1.0, block.width)
    if block.kind == NUMERICAL:
        norm = float(np.sqrt(np.sum(pattern ** 2)))  # cells iid N(0,1)
    else:
        centered = pattern - pattern.mean()          # levels uniform
        norm = float(np.std(centered))
        pattern = centered
    if norm == 0.0:
        return np.zeros(block.width)
    return block.strength * pattern / norm


def _row_count(spec: DriftSpec, t: int) -> int:
    seasonal = 1.0 + spec.seasonal_amplitude * np.sin(2.0 * np.pi * t / spec.seasonal_period)
    return max(int(round(spec.base_rows * seasonal)), spec.min_rows)


def _solve_intercept(logits, target):
    """Bisection on c so that mean(sigmoid(logits + c)) == target."""
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.mean(sigmoid(logits + mid))) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(spec: DriftSpec):
    """Build the dataset and its ground-truth manifest.

    Returns (TemporalDataset, manifest). Identical specs produce identical
    datasets byte for byte.
    """
    rng = np.random.default_rng(spec.seed)
    betas = {b.name: _block_betas(b) for b in spec.blocks}

    columns = {"t": []}
    for b in spec.blocks:
        if b.kind == NUMERICAL:
            for j in range(b.width):
                columns[f"{b.name}_{j}"] = []
        else:
            columns[b.name] = []
    for j in range(spec.noise_features):
        columns[f"noise_{j}"] = []
    columns["y"] = []

    intercepts = []
    row_counts = []
    for t in range(1, spec.T + 1):
        n_t = _row_count(spec, t)
        row_counts.append(n_t)
        logit = np.zeros(n_t)
        for b in spec.blocks:
            active = b.t_on <= t <= b.t_off
            if b.kind == NUMERICAL:
                if active:
                    cells = rng.standard_normal((n_t, b.width))
                    logit += cells @ betas[b.name]
                    for j in range(b.width):
                        columns[f"{b.name}_{j}"].extend(f"{v:.6g}" for v in cells[:, j])
                else:
                    for j in range(b.width):
                        columns[f"{b.name}_{j}"].extend([""] * n_t)
            else:
                if active:
                    levels = rng.integers(0, b.width, size=n_t)
                    logit += betas[b.name][levels]
                    columns[b.name].extend(f"lv{v}" for v in levels)
                else:
                    columns[b.name].extend([""] * n_t)
        for j in range(spec.noise_features):
            cells = rng.standard_normal(n_t)
            columns[f"noise_{j}"].extend(f"{v:.6g}" for v in cells)
        c_t = _solve_intercept(logit, spec.prevalence[t - 1])
        intercepts.append(c_t)
        y = (rng.random(n_t) < sigmoid(logit + c_t)).astype(int)
        columns["y"].extend(str(v) for v in y)
        columns["t"].extend([str(2000 + t)] * n_t)

    schema = build_schema(spec)
    data = build_dataset(schema, columns, granularity="year", source="synthetic")
    manifest = {
        "seed": spec.seed,
        "T": spec.T,
        "base_rows": spec.base_rows,
        "row_counts": row_counts,
        "prevalence_schedule": list(spec.prevalence),
        "intercepts": intercepts,
        "noise_features": spec.noise_features,
        "blocks": [
            {
                "name": b.name,
                "kind": b.kind,
                "width": b.width,
                "strength": b.strength,
                "active": [b.t_on, b.t_off],
                "betas": betas[b.name].tolist(),
                "columns": (
                    [f"{b.name}_{j}" for j in range(b.width)]
                    if b.kind == NUMERICAL else [b.name]
                ),
            }
            for b in spec.blocks
        ],
    }
    return data, manifest


def build_schema(spec: DriftSpec):
    schema = [ColumnSpec("t", TIME)]
    for b in spec.blocks:
        if b.kind == NUMERICAL:
            schema.extend(ColumnSpec(f"{b.name}_{j}", NUMERICAL) for j in range(b.width))
        else:
            schema.append(ColumnSpec(b.name, CATEGORICAL))
    schema.extend(ColumnSpec(f"noise_{j}", NUMERICAL) for j in range(spec.noise_features))
    schema.append(ColumnSpec("y", LABEL))
    return tuple(schema)


def write_dataset(spec: DriftSpec, out_dir):
    """Emit data.csv, schema.yaml and manifest.json consumable by the CLI."""
    import csv
    from pathlib import Path

    import yaml

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data, manifest = generate(spec)

    # regenerate raw cells in schema order for the CSV
    names = [c.name for c in data.schema]
    raw_time = data.meta["raw_time"]
    with open(out / "data.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.n_rows):
            row = []
            for c in data.schema:
                if c.kind == TIME:
                    row.append(raw_time[i])
                elif c.kind == LABEL:
                    j = data.label_names.index(c.label_name or c.name)
                    row.append(str(int(data.labels_matrix[i, j])))
                elif c.kind == NUMERICAL:
                    v = data.numerical[c.name][i]
                    row.append("" if np.isnan(v) else f"{v:.6g}")
                else:
                    v = data.categorical[c.name][i]
                    row.append("" if v is None else v)
            writer.writerow(row)

    schema_doc = {
        "granularity": "year",
        "columns": [{"name": c.name, "kind": c.kind} for c in data.schema],
    }
    with open(out / "schema.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(schema_doc, fh, sort_keys=False)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out / "data.csv"


def constant_prevalence(T, p):
    return tuple([p] * T)


def ramp_prevalence(T, anchors):
    """Piecewise-linear schedule through (t, p) anchor points."""
    anchors = sorted(anchors)
    ts = np.array([a[0] for a in anchors], dtype=float)
    ps = np.array([a[1] for a in anchors], dtype=float)
    return tuple(float(np.interp(t, ts, ps)) for t in range(1, T + 1))


def feature_churn_spec(seed=7) -> DriftSpec:
    """The fixed churn benchmark: one strong block active on [5, 12].

    Volumes dip sharply inside the block's era (clipped sinusoid), the
    scheduled prevalence falls with them, and wide weak blocks carry the
    out-of-era signal, so recent-window training pools shrink exactly where
    the strong block dominates in-period ranking.
    """
    T = 20
    return DriftSpec(
        T=T,
        base_rows=1500,
        blocks=(
            FeatureBlock("base", NUMERICAL, 104, 0.8, 1, T),
            FeatureBlock("eod", CATEGORICAL, 4, 9.0, 5, 12),
            FeatureBlock("wide", NUMERICAL, 32, 0.95, 6, T),
            FeatureBlock("mid", NUMERICAL, 12, 0.9, 8, T),
        ),
        prevalence=ramp_prevalence(T, [(1, 0.40), (5, 0.40), (8, 0.13),
                                       (12, 0.13), (14, 0.35), (T, 0.35)]),
        seasonal_amplitude=0.985,
        seasonal_period=14.0,
        min_rows=160,
        noise_features=12,
        seed=seed,
    )
