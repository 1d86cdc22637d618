"""Results bundle serialization: records.csv, summary.json, model documents.

Byte determinism is part of the contract for records.csv and summary.json:
floats are rendered with repr (shortest round-trip), JSON keys are sorted,
and nothing time- or host-dependent goes into either file. Wall-clock
metadata lives in manifest.json only.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

from .engine import RECORD_COLUMNS, EvalRecord

SUMMARY_SCHEMA_VERSION = 1


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv_text(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for r in records:
        hyper = "" if r.hyperparams is None else json.dumps(
            r.hyperparams, sort_keys=True, separators=(",", ":"))
        writer.writerow([
            r.regime, r.family, _cell(r.seed), _cell(r.t_star), _cell(r.test_time),
            _cell(r.staleness), r.metric, _cell(r.value), _cell(r.n_test),
            _cell(r.n_pos), r.flag, hyper,
        ])
    return buf.getvalue()


def write_records_csv(records, path):
    Path(path).write_text(records_to_csv_text(records), encoding="utf-8")


def _parse_cell(text, kind):
    if text == "":
        return None
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def read_records_csv(path):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected records.csv header {reader.fieldnames}")
        for row in reader:
            records.append(EvalRecord(
                regime=row["regime"],
                family=row["family"],
                seed=int(row["seed"]),
                t_star=_parse_cell(row["t_star"], int),
                test_time=_parse_cell(row["test_time"], int),
                staleness=_parse_cell(row["staleness"], int),
                metric=row["metric"],
                value=_parse_cell(row["value"], float),
                n_test=int(row["n_test"]),
                n_pos=int(row["n_pos"]),
                flag=row["flag"],
                hyperparams=json.loads(row["hyperparams_json"]) if row["hyperparams_json"] else None,
            ))
    return records


def config_digest(resolved_config: dict) -> str:
    blob = json.dumps(resolved_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def staleness_curves_doc(curves_by_metric):
    doc = {}
    for metric, curves in curves_by_metric.items():
        doc[metric] = [
            {
                "family": family,
                "regime": regime,
                "points": [
                    {
                        "staleness": p.staleness,
                        "mean": p.mean,
                        "std": p.std,
                        "n": p.n,
                        "n_excluded": p.n_excluded,
                        "grayed": p.grayed,
                    }
                    for p in points
                ],
            }
            for (family, regime), points in sorted(curves.items())
        ]
    return doc


def build_summary(records, summaries, curves_by_metric, fractions, plans,
                  resolved_config, master_seed, dataset_info):
    """The summary.json document (deterministic; no wall clock)."""
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "manifest": {
            "config_hash": config_digest(resolved_config),
            "master_seed": master_seed,
            "n_records": len(records),
            "dataset": dataset_info,
        },
        "split_plans": [
            {
                "seed_index": i,
                "plan_seed": plan.seed,
                "grouped": plan.grouped,
                "sizes": {str(t): list(sizes) for t, sizes in plan.role_sizes().items()},
            }
            for i, plan in enumerate(plans)
        ],
        "history_window_fraction": {
            str(t): fr for t, fr in sorted(fractions.items())
        },
        "summaries": summaries,
        "staleness_curves": staleness_curves_doc(curves_by_metric),
    }


def dump_json(doc, path):
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_model_docs(model_docs, out_dir):
    """One JSON document per fitted cell, under models/."""
    models_dir = Path(out_dir) / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for doc in model_docs:
        t_part = "all" if doc["t_star"] is None else f"t{doc['t_star']:03d}"
        name = f"{doc['regime']}__{doc['family']}__seed{doc['seed']}__{t_part}.json"
        dump_json(doc, models_dir / name)
        index.append(name)
    dump_json(index, models_dir / "index.json")
    return models_dir
