"""Drift-diagnostic report data: importance trajectories over deployment
dates, prevalence and missingness series, highlight rules, max-drop tables.

The report is pure data (JSON/CSV); SVG rendering sits in plots.py and is
presentation-only. Importances default to the linear models' absolute
coefficients; features absent from a given model's matrix count as zero so
every trajectory is total over deployment dates.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import CATEGORICAL, MISSING_FEATURE_SUFFIX, missingness_profile
from .errors import ConfigError
from .models import importance

DIAGNOSTICS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DiagnosticsConfig:
    top_k: int = 5
    prevalence_threshold: float = 0.4
    delta_threshold: float = 0.2
    rank_threshold: float = 3.0
    families: tuple = ("lr",)

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        for name, v in (("prevalence_threshold", self.prevalence_threshold),
                        ("delta_threshold", self.delta_threshold)):
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must be in (0, 1)")
        if self.rank_threshold < 1:
            raise ConfigError("rank_threshold must be >= 1")


def top_feature_union(models_by_tstar, k):
    """Union of each deployment date's top-k features plus the full matrix.

    Returns (union, importance_matrix) where importance_matrix maps feature
    name -> {t*: importance} over all features seen by any model. Ranking
    ties break lexicographically by feature name.
    """
    all_features = sorted({
        name for model in models_by_tstar.values() if model is not None
        for name in (model.feature_names or ())
    })
    matrix = {name: {} for name in all_features}
    union = set()
    for t_star in sorted(models_by_tstar):
        model = models_by_tstar[t_star]
        if model is None:
            for name in all_features:
                matrix[name][t_star] = 0.0
            continue
        scores = importance(model)
        by_name = dict(zip(model.feature_names, scores))
        for name in all_features:
            matrix[name][t_star] = float(by_name.get(name, 0.0))
        ranked = sorted(by_name.items(), key=lambda kv: (-kv[1], kv[0]))
        union.update(name for name, _ in ranked[:k])
    return sorted(union), matrix


def per_tstar_topk(matrix, k):
    """Recompute each deployment date's top-k from an importance matrix."""
    t_stars = sorted({t for series in matrix.values() for t in series})
    out = {}
    for t in t_stars:
        ranked = sorted(((name, series.get(t, 0.0)) for name, series in matrix.items()),
                        key=lambda kv: (-kv[1], kv[0]))
        out[t] = [name for name, _ in ranked[:k]]
    return out


def _dummy_level(data, feature):
    """Map a dummy-feature name back to (column, level|missing) or None."""
    for col in data.categorical:
        if feature == f"{col}{MISSING_FEATURE_SUFFIX}":
            return col, None
        prefix = f"{col}="
        if feature.startswith(prefix):
            return col, feature[len(prefix):]
    return None


def prevalence_series(data, features):
    """Per-feature per-time-point positive proportions.

    Categorical dummy features get the fraction of rows at t carrying that
    level (or missing); numerical features get the mean of the raw column,
    reported in a separate map. Unknown names raise KeyError.
    """
    T = data.n_time_points
    categorical = {}
    numerical = {}
    for feature in features:
        parsed = _dummy_level(data, feature)
        if parsed is not None:
            col, level = parsed
            series = []
            for t in range(1, T + 1):
                rows = data.rows_at(t)
                cells = data.categorical[col][rows]
                if level is None:
                    hits = sum(1 for v in cells if v is None)
                else:
                    hits = sum(1 for v in cells if v == level)
                series.append(hits / max(len(rows), 1))
            categorical[feature] = series
        elif feature in data.numerical:
            series = []
            for t in range(1, T + 1):
                rows = data.rows_at(t)
                cells = data.numerical[feature][rows]
                observed = cells[~np.isnan(cells)]
                series.append(float(np.mean(observed)) if observed.size else None)
            numerical[feature] = series
        else:
            raise KeyError(f"unknown feature {feature!r}")
    return categorical, numerical


def highlight_features(categorical_series, numeric_ranks, config: DiagnosticsConfig):
    """Highlight flags per feature.

    Categorical: consistently prevalent (min >= p) or a one-step prevalence
    jump >= delta. Numerical: mean importance rank across deployment dates
    at or under the rank threshold.
    """
    flags = {}
    for feature, series in categorical_series.items():
        vals = [v for v in series if v is not None]
        if not vals:
            flags[feature] = False
            continue
        high = min(vals) >= config.prevalence_threshold
        jumps = [abs(b - a) for a, b in zip(series[:-1], series[1:])
                 if a is not None and b is not None]
        jump = bool(jumps) and max(jumps) >= config.delta_threshold
        flags[feature] = bool(high or jump)
    for feature, ranks in numeric_ranks.items():
        vals = [r for r in ranks if r is not None]
        flags[feature] = bool(vals) and float(np.mean(vals)) <= config.rank_threshold
    return flags


def numeric_rank_series(matrix, data):
    """Per-numerical-feature rank (1 = most important) per deployment date."""
    t_stars = sorted({t for series in matrix.values() for t in series})
    numeric_names = [name for name in matrix if name in data.numerical]
    ranks = {name: [] for name in numeric_names}
    for t in t_stars:
        ranked = sorted(((name, series.get(t, 0.0)) for name, series in matrix.items()),
                        key=lambda kv: (-kv[1], kv[0]))
        position = {name: i + 1 for i, (name, _) in enumerate(ranked)}
        for name in numeric_names:
            ranks[name].append(position.get(name))
    return ranks


def max_auroc_drop(records, family="lr", metric="auroc"):
    """Largest in-period-to-future decline per (regime, deployment date).

    Computed on seed-mean metrics; negative values (future improvement) are
    preserved. Entries without an in-period mean or without any future
    evaluation are flagged with a None drop.
    """
    cells = {}
    for r in records:
        if r.staleness is None or r.family != family or r.metric != metric:
            continue
        if r.value is None:
            continue
        cells.setdefault((r.regime, r.t_star, r.test_time), []).append(r.value)
    means = {key: float(np.mean(vals)) for key, vals in cells.items()}
    out = {}
    keys = {(regime, t_star) for regime, t_star, _ in means}
    for regime, t_star in sorted(keys):
        in_period = means.get((regime, t_star, t_star))
        futures = [v for (rg, ts, k), v in means.items()
                   if rg == regime and ts == t_star and k > t_star]
        if in_period is None or not futures:
            out[(regime, t_star)] = None
        else:
            out[(regime, t_star)] = in_period - min(futures)
    return out


@dataclass
class DiagnosticsReport:
    config: DiagnosticsConfig
    feature_union: dict            # regime -> sorted union of top-k features
    importance: dict               # regime -> {feature: {t*: value}}
    categorical_prevalence: dict   # feature -> series over t
    numerical_means: dict          # feature -> series over t
    highlights: dict               # feature -> bool
    max_drop: dict                 # regime -> {t*: drop or None}
    missingness_columns: list
    missingness: np.ndarray        # columns x T
    time_labels: list
    meta: dict = field(default_factory=dict)

    def to_doc(self):
        return {
            "schema_version": DIAGNOSTICS_SCHEMA_VERSION,
            "config": {
                "top_k": self.config.top_k,
                "prevalence_threshold": self.config.prevalence_threshold,
                "delta_threshold": self.config.delta_threshold,
                "rank_threshold": self.config.rank_threshold,
                "families": list(self.config.families),
            },
            "feature_union": self.feature_union,
            "importance": {
                regime: {
                    feature: {str(t): v for t, v in series.items()}
                    for feature, series in matrix.items()
                }
                for regime, matrix in self.importance.items()
            },
            "categorical_prevalence": self.categorical_prevalence,
            "numerical_means": self.numerical_means,
            "highlights": self.highlights,
            "max_drop": {
                regime: {str(t): v for t, v in drops.items()}
                for regime, drops in self.max_drop.items()
            },
            "missingness": {
                "columns": self.missingness_columns,
                "matrix": self.missingness.tolist(),
            },
            "time_labels": self.time_labels,
            "meta": self.meta,
        }


def build_report(data, records, models_by_regime, config: DiagnosticsConfig,
                 meta=None) -> DiagnosticsReport:
    """Assemble the full report from a finished run.

    ``models_by_regime`` maps regime -> {t*: TrainedModel} for the
    importance-bearing family (linear by default).
    """
    feature_union = {}
    importance_matrices = {}
    union_all = set()
    for regime, models in sorted(models_by_regime.items()):
        union, matrix = top_feature_union(models, config.top_k)
        feature_union[regime] = union
        importance_matrices[regime] = matrix
        union_all.update(union)

    categorical_series, numerical_series = prevalence_series(data, sorted(union_all))
    numeric_ranks = {}
    for regime, matrix in importance_matrices.items():
        for name, ranks in numeric_rank_series(matrix, data).items():
            if name in numerical_series:
                numeric_ranks.setdefault(name, []).extend(r for r in ranks if r is not None)
    highlights = highlight_features(categorical_series, numeric_ranks, config)

    drops = {}
    family = config.families[0]
    drop_table = max_auroc_drop(records, family=family)
    for (regime, t_star), value in drop_table.items():
        drops.setdefault(regime, {})[t_star] = value

    columns, matrix = missingness_profile(data)
    return DiagnosticsReport(
        config=config,
        feature_union=feature_union,
        importance=importance_matrices,
        categorical_prevalence=categorical_series,
        numerical_means=numerical_series,
        highlights=highlights,
        max_drop=drops,
        missingness_columns=columns,
        missingness=matrix,
        time_labels=list(data.time_labels),
        meta=dict(meta or {}),
    )


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def emit_report(report: DiagnosticsReport, out_dir, render_svg=True):
    """Write diagnostics.json, per-series CSVs and the SVG panels."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_doc()
    (out / "diagnostics.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    T = len(report.time_labels)
    for regime, matrix in sorted(report.importance.items()):
        t_stars = sorted({t for series in matrix.values() for t in series})
        rows = [
            [feature] + [repr(series.get(t, 0.0)) for t in t_stars]
            for feature, series in sorted(matrix.items())
        ]
        (out / f"importance_{regime}.csv").write_text(
            _csv_text(["feature"] + [str(t) for t in t_stars], rows), encoding="utf-8")

    rows = [
        [feature] + ["" if v is None else repr(v) for v in series]
        for feature, series in sorted(report.categorical_prevalence.items())
    ]
    (out / "prevalence.csv").write_text(
        _csv_text(["feature"] + [str(t) for t in range(1, T + 1)], rows), encoding="utf-8")

    rows = [
        [feature] + ["" if v is None else repr(v) for v in series]
        for feature, series in sorted(report.numerical_means.items())
    ]
    (out / "numerical_means.csv").write_text(
        _csv_text(["feature"] + [str(t) for t in range(1, T + 1)], rows), encoding="utf-8")

    drop_rows = []
    for regime, drops in sorted(report.max_drop.items()):
        for t_star, value in sorted(drops.items()):
            drop_rows.append([regime, t_star, "" if value is None else repr(value)])
    (out / "max_drop.csv").write_text(
        _csv_text(["regime", "t_star", "max_drop"], drop_rows), encoding="utf-8")

    rows = [
        [col] + [repr(float(v)) for v in report.missingness[i]]
        for i, col in enumerate(report.missingness_columns)
    ]
    (out / "missingness.csv").write_text(
        _csv_text(["column"] + [str(t) for t in range(1, T + 1)], rows), encoding="utf-8")

    if render_svg:
        from . import plots

        plots.render_diagnostics(report, out)
    return out
