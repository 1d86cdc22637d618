"""Command-line entry point: synth, run, report.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
failure. ``run`` honors --jobs (or HINDCAST_JOBS) with output identical to a
serial run; HINDCAST_OUT overrides the output directory.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import (
    diagnostics_config_from,
    drift_spec_from,
    experiment_config_from,
    load_dataset_from,
    load_yaml,
    resolve_run_config,
)
from .diagnostics import build_report, emit_report
from .engine import (
    ALL_HISTORICAL,
    aggregate_by_staleness,
    history_fractions,
    run_experiment,
    summarize,
)
from .errors import ConfigError, DataError, HindcastError
from .models import TrainedModel
from .results import (
    build_summary,
    config_digest,
    dump_json,
    read_records_csv,
    write_model_docs,
    write_records_csv,
)
from .synth import write_dataset

logger = logging.getLogger("hindcast")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _out_dir(args, resolved=None):
    if os.environ.get("HINDCAST_OUT"):
        return Path(os.environ["HINDCAST_OUT"])
    if getattr(args, "out", None):
        return Path(args.out)
    if resolved is not None:
        return Path(resolved["output"]["dir"])
    raise ConfigError("no output directory given")


def _jobs(args):
    if os.environ.get("HINDCAST_JOBS"):
        return max(int(os.environ["HINDCAST_JOBS"]), 1)
    return max(getattr(args, "jobs", 1) or 1, 1)


def cmd_synth(args):
    doc = load_yaml(args.spec)
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = drift_spec_from(doc)
    out = _out_dir(args)
    csv_path = write_dataset(spec, out)
    logger.info("wrote %s", csv_path)
    return 0


def cmd_run(args):
    doc = load_yaml(args.config)
    resolved = resolve_run_config(doc, base_dir=Path(args.config).parent)
    out = _out_dir(args, resolved)
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset_from(resolved)
    config = experiment_config_from(resolved)

    records, model_docs, plans = run_experiment(config, data, jobs=_jobs(args))
    fractions = history_fractions(plans, config.window, data.n_time_points)
    curves = {}
    base_family, base_regime = config.baseline
    if base_family in config.families and base_regime in config.regimes:
        for metric in config.metrics:
            curves[metric] = aggregate_by_staleness(
                records, fractions, baseline=config.baseline, metric=metric)
    summaries = summarize(records)
    summary = build_summary(
        records, summaries, curves, fractions, plans, resolved,
        config.master_seed,
        dataset_info={
            "path": resolved["dataset"]["path"],
            "rows": data.n_rows,
            "time_points": list(data.time_labels),
            "labels": list(data.label_names),
        },
    )
    write_records_csv(records, out / "records.csv")
    dump_json(summary, out / "summary.json")
    dump_json(
        {
            "resolved_config": resolved,
            "config_hash": config_digest(resolved),
            "master_seed": config.master_seed,
            "package_version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
        out / "manifest.json",
    )
    write_model_docs(model_docs, out)
    flagged = sum(1 for r in records if r.flag)
    logger.info("wrote %d records (%d flagged) to %s", len(records), flagged, out)
    return 0


def cmd_report(args):
    results_dir = Path(args.results)
    records_path = results_dir / "records.csv"
    manifest_path = results_dir / "manifest.json"
    if not records_path.exists() or not manifest_path.exists():
        raise DataError(f"{results_dir}: not a results bundle (records.csv/manifest.json missing)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    resolved = resolve_run_config(manifest)
    if args.config:
        overrides = load_yaml(args.config)
        if "diagnostics" in overrides:
            resolved["diagnostics"].update(overrides["diagnostics"])
    records = read_records_csv(records_path)
    data = load_dataset_from(resolved)
    config = experiment_config_from(resolved)
    diag_config = diagnostics_config_from(resolved)
    out = Path(args.out) if args.out else results_dir

    models_by_regime = _load_models(results_dir, diag_config.families[0])
    report = build_report(
        data, records, models_by_regime, diag_config,
        meta={"source_bundle": str(results_dir), "config_hash": manifest["config_hash"]},
    )
    emit_report(report, out)

    from . import plots

    plans = None
    fractions = {}
    try:
        from .engine import build_plans

        plans = build_plans(config, data)
        fractions = history_fractions(plans, config.window, data.n_time_points)
    except HindcastError:
        pass
    base_family, base_regime = config.baseline
    if base_family in config.families and base_regime in config.regimes:
        curves = {
            metric: aggregate_by_staleness(records, fractions,
                                           baseline=config.baseline, metric=metric)
            for metric in config.metrics
        }
        plots.render_staleness(curves, out)
    for regime in config.regimes:
        plots.render_over_time(records, out, family=diag_config.families[0],
                               metric=config.metrics[0], regime=regime)
    logger.info("report written to %s", out)
    return 0


def _load_models(results_dir, family):
    """Seed-0 models per regime and deployment date from the bundle."""
    models_dir = Path(results_dir) / "models"
    index_path = models_dir / "index.json"
    if not index_path.exists():
        raise DataError(f"{results_dir}: models/index.json missing from bundle")
    by_regime = {}
    for name in json.loads(index_path.read_text(encoding="utf-8")):
        doc = json.loads((models_dir / name).read_text(encoding="utf-8"))
        if doc["family"] != family or doc["seed"] != 0 or doc["t_star"] is None:
            continue
        models = [None if m is None else TrainedModel.from_dict(m) for m in doc["models"]]
        model = models[0] if models else None
        by_regime.setdefault(doc["regime"], {})[doc["t_star"]] = model
    return by_regime


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hindcast",
        description="Temporal backtesting for tabular classifiers.",
    )
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a drifting synthetic dataset")
    p_synth.add_argument("--spec", required=True, help="drift spec YAML")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="run the backtesting experiment")
    p_run.add_argument("--config", required=True, help="run config YAML (or manifest.json)")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="emit diagnostics from a results bundle")
    p_report.add_argument("--results", required=True, help="results bundle directory")
    p_report.add_argument("--config", default=None,
                          help="optional YAML with a diagnostics section override")
    p_report.add_argument("--out", default=None, help="report output directory")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except HindcastError as exc:
        logger.error("runtime failure: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
