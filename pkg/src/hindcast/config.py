"""Run-configuration documents: schema, validation, resolution.

A run config is a single YAML document with dataset, experiment,
diagnostics and output sections. It is validated against the JSON schema
below before any work starts. Environment variables override only the
output directory (HINDCAST_OUT) and the job count (HINDCAST_JOBS).
"""

from __future__ import annotations

from pathlib import Path

import jsonschema
import yaml

from .dataset import DEFAULT_MISSING_TOKENS, ColumnSpec, load_csv
from .diagnostics import DiagnosticsConfig
from .engine import ExperimentConfig
from .errors import ConfigError
from .models import DEFAULT_GRIDS, HyperGrid
from .splitter import REGIME_KINDS, SplitRatios
from .synth import DriftSpec, FeatureBlock, constant_prevalence, feature_churn_spec, ramp_prevalence

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dataset", "experiment"],
    "additionalProperties": False,
    "properties": {
        "dataset": {
            "type": "object",
            "required": ["path", "columns"],
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "granularity": {"enum": ["year", "month"]},
                "min_rows_per_timepoint": {"type": "integer", "minimum": 1},
                "missing_values": {"type": "array", "items": {"type": "string"}},
                "columns": {
                    "type": "array",
                    "minItems": 2,
                    "items": {
                        "type": "object",
                        "required": ["name", "kind"],
                        "additionalProperties": False,
                        "properties": {
                            "name": {"type": "string"},
                            "kind": {"enum": ["categorical", "numerical", "time",
                                              "group_key", "label"]},
                            "label_name": {"type": "string"},
                        },
                    },
                },
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ratios": {
                    "type": "object",
                    "required": ["train", "val", "test"],
                    "additionalProperties": False,
                    "properties": {
                        "train": {"type": "number"},
                        "val": {"type": "number"},
                        "test": {"type": "number"},
                    },
                },
                "window": {"type": "integer", "minimum": 1},
                "n_seeds": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer"},
                "grouped": {"type": "boolean"},
                "all_period": {"type": "boolean"},
                "regimes": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": list(REGIME_KINDS)},
                },
                "families": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": ["lr", "gbdt", "mlp"]},
                },
                "metrics": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": ["auroc", "auprc", "weighted_auroc"]},
                },
                "grids": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "lr": {"type": "object"},
                        "gbdt": {"type": "object"},
                        "mlp": {"type": "object"},
                    },
                },
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "top_k": {"type": "integer", "minimum": 1},
                "prevalence_threshold": {"type": "number"},
                "delta_threshold": {"type": "number"},
                "rank_threshold": {"type": "number", "minimum": 1},
                "families": {"type": "array", "items": {"enum": ["lr", "gbdt", "mlp"]}},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

SYNTH_SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["feature_churn"]},
        "T": {"type": "integer", "minimum": 2},
        "base_rows": {"type": "integer", "minimum": 1},
        "seasonal_amplitude": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "seasonal_period": {"type": "number", "exclusiveMinimum": 0},
        "min_rows": {"type": "integer", "minimum": 1},
        "noise_features": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "prevalence": {
            "anyOf": [
                {"type": "number"},
                {"type": "array", "items": {"type": "number"}},
                {"type": "array",
                 "items": {"type": "array", "minItems": 2, "maxItems": 2}},
            ],
        },
        "blocks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "kind", "width", "strength", "active"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["categorical", "numerical"]},
                    "width": {"type": "integer", "minimum": 1},
                    "strength": {"type": "number", "minimum": 0},
                    "active": {"type": "array", "minItems": 2, "maxItems": 2,
                               "items": {"type": "integer"}},
                },
            },
        },
    },
}


def _validate(doc, schema, what):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {what} at {path}: {exc.message}")


def load_yaml(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return doc


def resolve_run_config(doc, base_dir="."):
    """Validate and fill defaults; returns the resolved plain dict."""
    if "resolved_config" in doc:  # a manifest.json round-trip
        doc = doc["resolved_config"]
    _validate(doc, RUN_CONFIG_SCHEMA, "run config")
    resolved = {
        "dataset": {
            "path": str((Path(base_dir) / doc["dataset"]["path"]).resolve()),
            "granularity": doc["dataset"].get("granularity", "year"),
            "min_rows_per_timepoint": doc["dataset"].get("min_rows_per_timepoint", 1),
            "missing_values": doc["dataset"].get("missing_values",
                                                 list(DEFAULT_MISSING_TOKENS)),
            "columns": [dict(c) for c in doc["dataset"]["columns"]],
        },
        "experiment": {
            "ratios": doc.get("experiment", {}).get(
                "ratios", {"train": 0.8, "val": 0.1, "test": 0.1}),
            "window": doc.get("experiment", {}).get("window", 4),
            "n_seeds": doc.get("experiment", {}).get("n_seeds", 5),
            "master_seed": doc.get("experiment", {}).get("master_seed", 0),
            "grouped": doc.get("experiment", {}).get("grouped", False),
            "all_period": doc.get("experiment", {}).get("all_period", True),
            "regimes": doc.get("experiment", {}).get(
                "regimes", ["sliding_window", "all_historical"]),
            "families": doc.get("experiment", {}).get("families", ["lr"]),
            "metrics": doc.get("experiment", {}).get("metrics", ["auroc"]),
            "grids": doc.get("experiment", {}).get("grids", {}),
        },
        "diagnostics": {
            "top_k": doc.get("diagnostics", {}).get("top_k", 5),
            "prevalence_threshold": doc.get("diagnostics", {}).get(
                "prevalence_threshold", 0.4),
            "delta_threshold": doc.get("diagnostics", {}).get("delta_threshold", 0.2),
            "rank_threshold": doc.get("diagnostics", {}).get("rank_threshold", 3),
            "families": doc.get("diagnostics", {}).get("families", ["lr"]),
        },
        "output": {"dir": doc.get("output", {}).get("dir", "hindcast_out")},
    }
    return resolved


def experiment_config_from(resolved) -> ExperimentConfig:
    exp = resolved["experiment"]
    grids = {k: dict(v) for k, v in DEFAULT_GRIDS.items()}
    for family, grid in exp["grids"].items():
        grids[family] = {k: list(v) for k, v in grid.items()}
    return ExperimentConfig(
        ratios=SplitRatios(**exp["ratios"]),
        regimes=tuple(exp["regimes"]),
        families=tuple(exp["families"]),
        metrics=tuple(exp["metrics"]),
        window=exp["window"],
        n_seeds=exp["n_seeds"],
        master_seed=exp["master_seed"],
        grouped=exp["grouped"],
        all_period=exp["all_period"],
        grid=HyperGrid(grids),
    )


def diagnostics_config_from(resolved) -> DiagnosticsConfig:
    d = resolved["diagnostics"]
    return DiagnosticsConfig(
        top_k=d["top_k"],
        prevalence_threshold=d["prevalence_threshold"],
        delta_threshold=d["delta_threshold"],
        rank_threshold=d["rank_threshold"],
        families=tuple(d["families"]),
    )


def schema_from(resolved):
    return tuple(
        ColumnSpec(c["name"], c["kind"], c.get("label_name"))
        for c in resolved["dataset"]["columns"]
    )


def load_dataset_from(resolved):
    ds = resolved["dataset"]
    return load_csv(
        ds["path"],
        schema_from(resolved),
        granularity=ds["granularity"],
        min_rows_per_timepoint=ds["min_rows_per_timepoint"],
        missing_tokens=tuple(ds["missing_values"]),
    )


def drift_spec_from(doc) -> DriftSpec:
    """Build a DriftSpec from a synth spec document."""
    _validate(doc, SYNTH_SPEC_SCHEMA, "synth spec")
    if doc.get("preset") == "feature_churn":
        spec = feature_churn_spec(seed=doc.get("seed", 7))
        return spec
    required = [k for k in ("T", "base_rows", "blocks") if k not in doc]
    if required:
        raise ConfigError(f"synth spec missing fields: {required}")
    T = doc["T"]
    prevalence = doc.get("prevalence", 0.3)
    if isinstance(prevalence, (int, float)):
        schedule = constant_prevalence(T, float(prevalence))
    elif prevalence and isinstance(prevalence[0], (list, tuple)):
        schedule = ramp_prevalence(T, [(int(t), float(p)) for t, p in prevalence])
    else:
        schedule = tuple(float(p) for p in prevalence)
    blocks = tuple(
        FeatureBlock(b["name"], b["kind"], b["width"], b["strength"],
                     b["active"][0], b["active"][1])
        for b in doc["blocks"]
    )
    return DriftSpec(
        T=T,
        base_rows=doc["base_rows"],
        blocks=blocks,
        prevalence=schedule,
        seasonal_amplitude=doc.get("seasonal_amplitude", 0.0),
        seasonal_period=doc.get("seasonal_period", 12.0),
        min_rows=doc.get("min_rows", 30),
        noise_features=doc.get("noise_features", 0),
        seed=doc.get("seed", 0),
    )
