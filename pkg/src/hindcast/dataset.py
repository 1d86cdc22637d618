"""Timestamped tabular data: CSV ingestion, schema checks, preprocessing.

Preprocessing follows the fit/transform split: categorical columns one-hot
over a vocabulary learned from the fitting rows plus an explicit missing
category; numerical columns are centered and scaled by statistics from the
same rows, with missing values imputed by the fitted mean. All statistics
come from the fitting rows only, so a transform never leaks information from
evaluation rows.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError, LabelError, RowError, SchemaError

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
NUMERICAL = "numerical"
TIME = "time"
GROUP_KEY = "group_key"
LABEL = "label"

KINDS = {CATEGORICAL, NUMERICAL, TIME, GROUP_KEY, LABEL}

DEFAULT_MISSING_TOKENS = ("", "NA", "NaN")

# name for the explicit missing-category dummy; bracketed so it cannot
# collide with a real level rendered as "col=value"
MISSING_FEATURE_SUFFIX = "[missing]"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    label_name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")


def validate_schema(schema):
    """Check the schema invariants; returns the schema as a tuple."""
    schema = tuple(schema)
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaError("column names must be unique")
    n_time = sum(1 for c in schema if c.kind == TIME)
    if n_time != 1:
        raise SchemaError(f"exactly one time column required, found {n_time}")
    if sum(1 for c in schema if c.kind == GROUP_KEY) > 1:
        raise SchemaError("at most one group_key column allowed")
    if not any(c.kind == LABEL for c in schema):
        raise SchemaError("at least one label column required")
    return schema


def _parse_time_bucket(raw, granularity, row_number):
    raw = raw.strip()
    parts = raw.split("-")
    try:
        year = int(parts[0])
        month = int(parts[1]) if len(parts) > 1 else None
    except (ValueError, IndexError):
        raise RowError(row_number, f"unparseable timestamp {raw!r}")
    if granularity == "year":
        return f"{year:04d}"
    if granularity == "month":
        if month is None or not 1 <= month <= 12:
            raise RowError(row_number, f"timestamp {raw!r} lacks a valid month")
        return f"{year:04d}-{month:02d}"
    raise SchemaError(f"unknown granularity {granularity!r}")


def _parse_label(raw, row_number):
    v = raw.strip()
    if v == "0":
        return 0
    if v == "1":
        return 1
    raise LabelError(f"row {row_number}: label cell {raw!r} is not binary 0/1")


@dataclass
class TemporalDataset:
    """Rows bucketed into consecutive integer time points 1..T.

    Columns are stored columnar: numerical as float arrays with NaN for
    missing, categorical/group keys as object arrays with None for missing,
    labels as int8 matrices. ``time_labels[t-1]`` keeps the raw bucket each
    integer time point was mapped from. Instances are treated as immutable
    after construction.
    """

    schema: tuple
    numerical: dict
    categorical: dict
    labels_matrix: np.ndarray
    label_names: list
    time_points: np.ndarray
    time_labels: list
    group_keys: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return int(self.time_points.shape[0])

    @property
    def n_time_points(self) -> int:
        return len(self.time_labels)

    def rows_at(self, t) -> np.ndarray:
        return np.flatnonzero(self.time_points == t)

    def feature_columns(self):
        return [c for c in self.schema if c.kind in (CATEGORICAL, NUMERICAL)]

    def labels_for(self, rows) -> np.ndarray:
        return self.labels_matrix[np.asarray(rows, dtype=int)]


def _bucket_rows(raw_buckets, min_rows_per_timepoint):
    """Map raw bucket strings to 1..T, dropping too-small buckets."""
    counts = {}
    for b in raw_buckets:
        counts[b] = counts.get(b, 0) + 1
    kept = sorted(b for b, n in counts.items() if n >= min_rows_per_timepoint)
    dropped = sorted(b for b, n in counts.items() if n < min_rows_per_timepoint)
    if dropped:
        logger.warning(
            "dropping %d time point(s) under the %d-row minimum: %s",
            len(dropped), min_rows_per_timepoint, ", ".join(dropped),
        )
    if len(kept) >= 2:
        # note gaps collapsed by the consecutive remap
        logger.info("time points remapped to 1..%d (%s .. %s)", len(kept), kept[0], kept[-1])
    return {b: i + 1 for i, b in enumerate(kept)}, dropped


def build_dataset(schema, columns, granularity="year",
                  min_rows_per_timepoint=1, missing_tokens=DEFAULT_MISSING_TOKENS,
                  source=None):
    """Assemble a TemporalDataset from raw string cells, validating as we go.

    ``columns`` maps column name to a list of raw cell strings. This is the
    common path behind ``load_csv`` and the synthetic generator's writer.
    """
    schema = validate_schema(schema)
    missing = set(missing_tokens)
    names = {c.name for c in schema}
    if set(columns) != names:
        extra = sorted(set(columns) - names)
        absent = sorted(names - set(columns))
        raise SchemaError(f"columns do not match schema (missing {absent}, unexpected {extra})")
    n = len(next(iter(columns.values())))
    for name, cells in columns.items():
        if len(cells) != n:
            raise SchemaError(f"column {name!r} has {len(cells)} cells, expected {n}")

    time_col = next(c for c in schema if c.kind == TIME)
    label_cols = [c for c in schema if c.kind == LABEL]
    group_col = next((c for c in schema if c.kind == GROUP_KEY), None)

    raw_buckets = [
        _parse_time_bucket(columns[time_col.name][i], granularity, i + 1) for i in range(n)
    ]
    bucket_map, dropped = _bucket_rows(raw_buckets, min_rows_per_timepoint)
    if len(bucket_map) < 2:
        raise SchemaError("dataset must span at least two time points")
    keep = np.array([b in bucket_map for b in raw_buckets], dtype=bool)
    kept_idx = np.flatnonzero(keep)

    time_points = np.array([bucket_map[raw_buckets[i]] for i in kept_idx], dtype=int)
    time_labels = sorted(bucket_map, key=bucket_map.get)

    labels = np.empty((len(kept_idx), len(label_cols)), dtype=np.int8)
    for j, c in enumerate(label_cols):
        cells = columns[c.name]
        for out_i, i in enumerate(kept_idx):
            raw = cells[i]
            if raw is None or raw.strip() in missing:
                raise LabelError(f"row {i + 1}: label {c.name!r} is missing")
            labels[out_i, j] = _parse_label(raw, i + 1)

    numerical = {}
    categorical = {}
    for c in schema:
        cells = columns[c.name]
        if c.kind == NUMERICAL:
            out = np.empty(len(kept_idx), dtype=float)
            for out_i, i in enumerate(kept_idx):
                raw = cells[i]
                if raw is None or raw.strip() in missing:
                    out[out_i] = np.nan
                else:
                    try:
                        out[out_i] = float(raw)
                    except ValueError:
                        raise RowError(i + 1, f"unparseable numerical cell {raw!r} in {c.name!r}")
            numerical[c.name] = out
        elif c.kind == CATEGORICAL:
            out = np.empty(len(kept_idx), dtype=object)
            for out_i, i in enumerate(kept_idx):
                raw = cells[i]
                out[out_i] = None if raw is None or raw.strip() in missing else raw.strip()
            categorical[c.name] = out

    group_keys = None
    if group_col is not None:
        cells = columns[group_col.name]
        group_keys = np.array([str(cells[i]) for i in kept_idx], dtype=object)

    meta = {
        "granularity": granularity,
        "raw_time": [raw_buckets[i] for i in kept_idx],
        "dropped_time_buckets": dropped,
    }
    if source is not None:
        meta["source"] = str(source)
    return TemporalDataset(
        schema=schema,
        numerical=numerical,
        categorical=categorical,
        labels_matrix=labels,
        label_names=[c.label_name or c.name for c in label_cols],
        time_points=time_points,
        time_labels=time_labels,
        group_keys=group_keys,
        meta=meta,
    )


def load_csv(path, schema, granularity="year", min_rows_per_timepoint=1,
             missing_tokens=DEFAULT_MISSING_TOKENS):
    """Read an RFC-4180 CSV with a header row into a TemporalDataset."""
    schema = validate_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file")
        expected = {c.name for c in schema}
        if set(header) != expected:
            raise SchemaError(
                f"{path}: header {header} does not match schema columns {sorted(expected)}"
            )
        columns = {name: [] for name in header}
        for row_number, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise RowError(row_number, f"expected {len(header)} cells, got {len(row)}")
            for name, cell in zip(header, row):
                columns[name].append(cell)
    if not columns[header[0]]:
        raise SchemaError(f"{path}: no data rows")
    return build_dataset(
        schema, columns, granularity=granularity,
        min_rows_per_timepoint=min_rows_per_timepoint,
        missing_tokens=missing_tokens, source=path,
    )


@dataclass(frozen=True)
class PreprocessorState:
    """Frozen per-column encodings learned from one set of fitting rows.

    ``vocabularies`` maps a categorical column to its ordered levels (sorted,
    without the missing slot; the missing indicator is always the final dummy
    of the block). ``moments`` maps a numerical column to (mean, std) with the
    population convention; a constant column stores std 0 and transforms to
    0.0.
    """

    vocabularies: dict
    moments: dict
    feature_names: tuple
    fit_row_count: int
    fit_fingerprint: str


def _feature_names(schema, vocabularies):
    names = []
    for c in schema:
        if c.kind == CATEGORICAL:
            names.extend(f"{c.name}={level}" for level in vocabularies[c.name])
            names.append(f"{c.name}{MISSING_FEATURE_SUFFIX}")
        elif c.kind == NUMERICAL:
            names.append(c.name)
    return tuple(names)


def fit_preprocessor(data: TemporalDataset, fit_rows) -> PreprocessorState:
    """Learn vocabularies and moments from exactly the given rows."""
    rows = np.asarray(fit_rows, dtype=int)
    if rows.size == 0:
        raise FitError("cannot fit a preprocessor on an empty row set")
    vocabularies = {}
    moments = {}
    for c in data.schema:
        if c.kind == CATEGORICAL:
            col = data.categorical[c.name][rows]
            vocabularies[c.name] = tuple(sorted({v for v in col if v is not None}))
        elif c.kind == NUMERICAL:
            col = data.numerical[c.name][rows]
            observed = col[~np.isnan(col)]
            if observed.size == 0:
                moments[c.name] = (0.0, 0.0)
            else:
                mean = float(np.mean(observed))
                std = float(np.std(observed))  # population convention
                moments[c.name] = (mean, std)
    fingerprint = hashlib.sha256(np.sort(rows).astype("<i8").tobytes()).hexdigest()[:16]
    return PreprocessorState(
        vocabularies=vocabularies,
        moments=moments,
        feature_names=_feature_names(data.schema, vocabularies),
        fit_row_count=int(rows.size),
        fit_fingerprint=fingerprint,
    )


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense transformed design matrix plus its row bookkeeping."""

    X: np.ndarray
    feature_names: tuple
    y: np.ndarray
    rows: np.ndarray
    time_points: np.ndarray
    group_keys: np.ndarray | None


def transform(data: TemporalDataset, rows, state: PreprocessorState) -> FeatureMatrix:
    """Encode the given rows with a fitted state.

    Categorical: one-hot over the fitted vocabulary; a missing cell lights
    the block's missing indicator; a level unseen at fit time produces an
    all-zeros block (novel level, distinct from recorded-missing). Numerical:
    (x - mean) / std with missing imputed by the mean; std 0 maps to 0.0.
    """
    rows = np.asarray(rows, dtype=int)
    n = rows.size
    blocks = []
    for c in data.schema:
        if c.kind == CATEGORICAL:
            vocab = state.vocabularies[c.name]
            index = {level: i for i, level in enumerate(vocab)}
            width = len(vocab) + 1
            block = np.zeros((n, width))
            col = data.categorical[c.name][rows]
            for i, v in enumerate(col):
                if v is None:
                    block[i, width - 1] = 1.0
                else:
                    j = index.get(v)
                    if j is not None:
                        block[i, j] = 1.0
                    # unseen level: leave the block all zeros
            blocks.append(block)
        elif c.kind == NUMERICAL:
            mean, std = state.moments[c.name]
            col = data.numerical[c.name][rows]
            filled = np.where(np.isnan(col), mean, col)
            if std > 0:
                block = (filled - mean) / std
            else:
                block = np.zeros(n)
            blocks.append(block[:, None])
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(
        X=X,
        feature_names=state.feature_names,
        y=data.labels_matrix[rows],
        rows=rows,
        time_points=data.time_points[rows],
        group_keys=None if data.group_keys is None else data.group_keys[rows],
    )


def missingness_profile(data: TemporalDataset):
    """Missing-cell fraction per (feature column, time point).

    Returns (column_names, matrix) where matrix[c, t-1] is the fraction of
    rows at time point t with a missing cell in column c.
    """
    cols = data.feature_columns()
    T = data.n_time_points
    matrix = np.zeros((len(cols), T))
    for t in range(1, T + 1):
        rows = data.rows_at(t)
        denom = max(len(rows), 1)
        for ci, c in enumerate(cols):
            if c.kind == NUMERICAL:
                n_missing = int(np.sum(np.isnan(data.numerical[c.name][rows])))
            else:
                col = data.categorical[c.name][rows]
                n_missing = int(sum(1 for v in col if v is None))
            matrix[ci, t - 1] = n_missing / denom
    return [c.name for c in cols], matrix
