"""The backtesting loop: per-deployment-date training, future evaluation,
seed replication, staleness aggregation and the all-period baseline.

Each cell (seed, regime, family, deployment date) is independent: it fits a
preprocessor on its own training rows, grid-searches on its validation rows,
and evaluates on the in-period test partition plus every future time point.
Failures inside a cell are recorded as flagged records instead of aborting
the run, so the record-count arithmetic stays exact. Cells may execute in
parallel; results are merged by a deterministic sort, so the output is
independent of scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics as metrics_mod
from .dataset import TemporalDataset, fit_preprocessor, transform
from .errors import AggregationError, ConfigError, DegenerateLabelError, FitError, GridError
from .models import HyperGrid, grid_search, predict_scores
from .splitter import (
    ALL_HISTORICAL,
    REGIME_KINDS,
    RegimeSpec,
    SplitPlan,
    SplitRatios,
    all_period_split,
    build_split_plan,
    history_window_fraction,
    regime_train_val,
    stable_hash,
    test_sets,
)

ALL_PERIOD = "all_period"

METRIC_NAMES = ("auroc", "auprc", "weighted_auroc")

RECORD_COLUMNS = (
    "regime", "family", "seed", "t_star", "test_time", "staleness",
    "metric", "value", "n_test", "n_pos", "flag", "hyperparams_json",
)


@dataclass(frozen=True)
class ExperimentConfig:
    ratios: SplitRatios
    regimes: tuple = (ALL_HISTORICAL,)
    families: tuple = ("lr",)
    metrics: tuple = ("auroc",)
    window: int = 4
    n_seeds: int = 5
    master_seed: int = 0
    grouped: bool = False
    all_period: bool = True
    grid: HyperGrid = field(default_factory=HyperGrid)
    baseline: tuple = ("lr", ALL_HISTORICAL)

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        for r in self.regimes:
            if r not in REGIME_KINDS:
                raise ConfigError(f"unknown regime {r!r}")
        for m in self.metrics:
            if m not in METRIC_NAMES:
                raise ConfigError(f"unknown metric {m!r}")
        if not self.families:
            raise ConfigError("at least one model family required")
        if not self.metrics:
            raise ConfigError("at least one metric required")


@dataclass(frozen=True)
class EvalRecord:
    regime: str
    family: str
    seed: int
    t_star: int | None
    test_time: int | None
    staleness: int | None
    metric: str
    value: float | None
    n_test: int
    n_pos: int
    flag: str = ""
    hyperparams: dict | None = None

    def sort_key(self):
        return (
            self.regime, self.family, self.seed,
            -1 if self.t_star is None else self.t_star,
            -1 if self.test_time is None else self.test_time,
            self.metric,
        )


def plan_seed(master_seed: int, seed_index: int) -> int:
    return stable_hash(master_seed, "plan", seed_index) % 2 ** 32


def cell_seed(master_seed: int, seed_index: int, regime: str, family: str, t_star) -> int:
    return stable_hash(master_seed, seed_index, regime, family, t_star) % 2 ** 32


def build_plans(config: ExperimentConfig, data: TemporalDataset):
    return [
        build_split_plan(data, config.ratios, plan_seed(config.master_seed, i), config.grouped)
        for i in range(config.n_seeds)
    ]


def _validate(config: ExperimentConfig, data: TemporalDataset):
    T = data.n_time_points
    if config.window > T:
        raise ConfigError(f"window {config.window} exceeds T={T}")
    n_labels = data.labels_matrix.shape[1]
    if n_labels > 1 and tuple(config.metrics) != ("weighted_auroc",):
        raise ConfigError("multi-label datasets support only the weighted_auroc metric")


def _metric_value(name, scores, y):
    if name == "auroc":
        return metrics_mod.auroc(scores[:, 0], y[:, 0])
    if name == "auprc":
        return metrics_mod.auprc(scores[:, 0], y[:, 0])
    if name == "weighted_auroc":
        return metrics_mod.weighted_multilabel_auroc(scores, y)
    raise ConfigError(f"unknown metric {name!r}")


def _flagged_records(regime, family, seed_idx, t_star, eval_times, config, data, plans, flag):
    """UNDEFINED records for every (k, metric) of a failed cell."""
    plan = plans[seed_idx]
    out = []
    for k in eval_times:
        if t_star is None:
            if k is None:
                n_test = int(sum(plan.test[t].size for t in plan.test))
            else:
                n_test = int(plan.test[k].size)
            staleness = None
        else:
            rows = plan.test[t_star] if k == t_star else data.rows_at(k)
            n_test = int(rows.size)
            staleness = k - t_star
        for m in config.metrics:
            out.append(EvalRecord(
                regime=regime, family=family, seed=seed_idx, t_star=t_star,
                test_time=k, staleness=staleness,
                metric=m, value=None, n_test=n_test, n_pos=0,
                flag=flag, hyperparams=None,
            ))
    return out


def _fit_cell_models(config, family, Xtr, ytr, Xval, yval, seed):
    """One grid-searched model per label column.

    Single-label datasets produce a one-element list. A label whose training
    column is single-class gets a None model (scored 0.5) plus a flag.
    """
    models = []
    flags = []
    n_labels = ytr.shape[1]
    for j in range(n_labels):
        if np.unique(ytr[:, j]).size < 2:
            models.append(None)
            flags.append("degenerate_train" if n_labels == 1 else f"degenerate_train_label{j}")
            continue
        try:
            model, gflags = grid_search(
                family, config.grid, Xtr, ytr[:, j], Xval, yval[:, j], seed,
            )
        except (GridError, DegenerateLabelError) as exc:
            models.append(None)
            flags.append(f"grid_error:{type(exc).__name__}")
            continue
        models.append(model)
        flags.extend(gflags)
    return models, sorted(set(flags))


def _score_matrix(models, X):
    cols = []
    for model in models:
        if model is None:
            cols.append(np.full(X.shape[0], 0.5))
        else:
            cols.append(predict_scores(model, X))
    return np.column_stack(cols)


def _hyperparams_of(models, label_names):
    fitted = [(name, m) for name, m in zip(label_names, models) if m is not None]
    if not fitted:
        return None
    if len(label_names) == 1:
        return fitted[0][1].hyperparameters
    return {name: m.hyperparameters for name, m in fitted}


def run_cell(config: ExperimentConfig, data: TemporalDataset, plans, seed_idx,
             regime_kind, family, t_star):
    """All EvalRecords for one (seed, regime, family, t*) cell."""
    plan = plans[seed_idx]
    T = data.n_time_points
    eval_times = list(range(t_star, T + 1))
    regime = RegimeSpec(regime_kind, config.window)
    train_rows, val_rows = regime_train_val(t_star, regime, plan)
    seed = cell_seed(config.master_seed, seed_idx, regime_kind, family, t_star)

    try:
        state = fit_preprocessor(data, train_rows)
    except FitError:
        return _flagged_records(regime_kind, family, seed_idx, t_star, eval_times,
                                config, data, plans, "empty_train"), None
    train_fm = transform(data, train_rows, state)
    val_fm = transform(data, val_rows, state)
    models, flags = _fit_cell_models(
        config, family, train_fm.X, train_fm.y, val_fm.X, val_fm.y, seed,
    )
    if all(m is None for m in models):
        return _flagged_records(regime_kind, family, seed_idx, t_star, eval_times,
                                config, data, plans, ";".join(flags)), None
    for m in models:
        if m is not None and m.feature_names is None:
            m.feature_names = state.feature_names

    hyper = _hyperparams_of(models, data.label_names)
    in_period, out_of_period = test_sets(t_star, plan, data)
    records = []
    for k in eval_times:
        rows = in_period if k == t_star else out_of_period[k]
        fm = transform(data, rows, state)
        scores = _score_matrix(models, fm.X) if rows.size else np.zeros((0, len(models)))
        for metric_name in config.metrics:
            if rows.size == 0:
                value = metrics_mod.MetricValue(None, 0, 0, "empty_test")
            else:
                value = _metric_value(metric_name, scores, fm.y)
            record_flags = list(flags)
            if value.flag:
                record_flags.append(value.flag)
            records.append(EvalRecord(
                regime=regime_kind, family=family, seed=seed_idx, t_star=t_star,
                test_time=k, staleness=k - t_star, metric=metric_name,
                value=value.value, n_test=int(rows.size), n_pos=value.n_pos,
                flag=";".join(sorted(set(record_flags))), hyperparams=hyper,
            ))
    cell_models = {
        "regime": regime_kind, "family": family, "seed": seed_idx, "t_star": t_star,
        "models": models,
    }
    return records, cell_models


def run_all_period_cell(config: ExperimentConfig, data: TemporalDataset, plans,
                        seed_idx, family):
    """Overall and per-timepoint records for the time-agnostic baseline."""
    plan = plans[seed_idx]
    T = data.n_time_points
    train_rows, val_rows, test_rows = all_period_split(plan)
    seed = cell_seed(config.master_seed, seed_idx, ALL_PERIOD, family, "all")
    try:
        state = fit_preprocessor(data, train_rows)
    except FitError:
        eval_times = [None] + list(range(1, T + 1))
        recs = _flagged_records(ALL_PERIOD, family, seed_idx, None, eval_times, config,
                                data, plans, "empty_train")
        return recs, None
    train_fm = transform(data, train_rows, state)
    val_fm = transform(data, val_rows, state)
    models, flags = _fit_cell_models(
        config, family, train_fm.X, train_fm.y, val_fm.X, val_fm.y, seed,
    )
    if all(m is None for m in models):
        eval_times = [None] + list(range(1, T + 1))
        return _flagged_records(ALL_PERIOD, family, seed_idx, None, eval_times, config,
                                data, plans, ";".join(flags)), None
    for m in models:
        if m is not None and m.feature_names is None:
            m.feature_names = state.feature_names
    hyper = _hyperparams_of(models, data.label_names)

    records = []

    def evaluate(rows, test_time):
        fm = transform(data, rows, state)
        scores = _score_matrix(models, fm.X) if rows.size else np.zeros((0, len(models)))
        for metric_name in config.metrics:
            if rows.size == 0:
                value = metrics_mod.MetricValue(None, 0, 0, "empty_test")
            else:
                value = _metric_value(metric_name, scores, fm.y)
            record_flags = list(flags)
            if value.flag:
                record_flags.append(value.flag)
            records.append(EvalRecord(
                regime=ALL_PERIOD, family=family, seed=seed_idx, t_star=None,
                test_time=test_time, staleness=None, metric=metric_name,
                value=value.value, n_test=int(rows.size), n_pos=value.n_pos,
                flag=";".join(sorted(set(record_flags))), hyperparams=hyper,
            ))

    evaluate(test_rows, None)  # Table-2-style overall figure
    for t in range(1, T + 1):
        evaluate(plan.test[t], t)  # per-timepoint reference line
    cell_models = {
        "regime": ALL_PERIOD, "family": family, "seed": seed_idx, "t_star": None,
        "models": models,
    }
    return records, cell_models


# -- parallel execution ------------------------------------------------------

_WORKER_CTX = {}


def _init_worker(config, data, plans):
    _WORKER_CTX["config"] = config
    _WORKER_CTX["data"] = data
    _WORKER_CTX["plans"] = plans


def _run_task(task):
    config = _WORKER_CTX["config"]
    data = _WORKER_CTX["data"]
    plans = _WORKER_CTX["plans"]
    kind = task[0]
    if kind == "cell":
        _, seed_idx, regime, family, t_star = task
        records, cell_models = run_cell(config, data, plans, seed_idx, regime, family, t_star)
    else:
        _, seed_idx, family = task
        records, cell_models = run_all_period_cell(config, data, plans, seed_idx, family)
    return task, records, _serialize_cell(cell_models)


def _serialize_cell(cell_models):
    if cell_models is None:
        return None
    return {
        **{k: cell_models[k] for k in ("regime", "family", "seed", "t_star")},
        "models": [None if m is None else m.to_dict() for m in cell_models["models"]],
    }


def _tasks(config: ExperimentConfig, data: TemporalDataset):
    T = data.n_time_points
    tasks = []
    for seed_idx in range(config.n_seeds):
        for regime in config.regimes:
            for family in config.families:
                for t_star in range(config.window, T + 1):
                    tasks.append(("cell", seed_idx, regime, family, t_star))
        if config.all_period:
            for family in config.families:
                tasks.append(("ap", seed_idx, family))
    return tasks


def run_experiment(config: ExperimentConfig, data: TemporalDataset, jobs: int = 1):
    """Execute every cell and return (records, model_docs, plans).

    Records come back sorted on a deterministic key, so serial and parallel
    runs emit identical output.
    """
    _validate(config, data)
    plans = build_plans(config, data)
    tasks = _tasks(config, data)
    all_records = []
    model_docs = []
    if jobs <= 1:
        _init_worker(config, data, plans)
        results = map(_run_task, tasks)
        for _, records, cell_doc in results:
            all_records.extend(records)
            if cell_doc is not None:
                model_docs.append(cell_doc)
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(config, data, plans),
        ) as pool:
            for _, records, cell_doc in pool.map(_run_task, tasks, chunksize=1):
                all_records.extend(records)
                if cell_doc is not None:
                    model_docs.append(cell_doc)
    all_records.sort(key=EvalRecord.sort_key)
    model_docs.sort(key=lambda d: (d["regime"], d["family"], d["seed"],
                                   -1 if d["t_star"] is None else d["t_star"]))
    return all_records, model_docs, plans


def run_emdot(config: ExperimentConfig, data: TemporalDataset, jobs: int = 1):
    """Deployment-date records only (no all-period baseline)."""
    records, _, _ = run_experiment(replace(config, all_period=False), data, jobs=jobs)
    return records


def run_all_period(config: ExperimentConfig, data: TemporalDataset):
    """All-period baseline records only."""
    _validate(config, data)
    plans = build_plans(config, data)
    records = []
    for seed_idx in range(config.n_seeds):
        for family in config.families:
            recs, _ = run_all_period_cell(config, data, plans, seed_idx, family)
            records.extend(recs)
    records.sort(key=EvalRecord.sort_key)
    return records


# -- aggregation -------------------------------------------------------------

def _population_std(values):
    arr = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean((arr - arr.mean()) ** 2)))


def summarize(records):
    """Mean and population std over seeds per (regime, family, t*, k, metric)."""
    groups = {}
    for r in records:
        key = (r.regime, r.family, r.t_star, r.test_time, r.metric)
        groups.setdefault(key, []).append(r)
    def group_key(k):
        return (k[0], k[1], -1 if k[2] is None else k[2], -1 if k[3] is None else k[3], k[4])

    out = []
    for key in sorted(groups, key=group_key):
        rs = groups[key]
        defined = [r.value for r in rs if r.value is not None]
        entry = {
            "regime": key[0], "family": key[1], "t_star": key[2],
            "test_time": key[3], "metric": key[4],
            "n": len(defined), "n_excluded": len(rs) - len(defined),
        }
        if defined:
            entry["mean"] = float(np.mean(defined))
            entry["std"] = _population_std(defined)
        out.append(entry)
    return out


def history_fractions(plans, window, T):
    """Per-deployment-date share of all-historical training rows in t <= W."""
    return {
        t_star: [history_window_fraction(plan, t_star, window) for plan in plans]
        for t_star in range(window, T + 1)
    }


@dataclass(frozen=True)
class StalenessPoint:
    staleness: int
    mean: float | None
    std: float | None
    n: int
    n_excluded: int
    grayed: bool


def aggregate_by_staleness(records, fractions, baseline=("lr", ALL_HISTORICAL),
                           metric="auroc"):
    """Per-(family, regime) staleness curves of deltas against the baseline.

    Every record is matched to the baseline record with the same (seed, t*,
    test time); a missing baseline cell raises AggregationError naming the
    holes. The gray flag marks stalenesses whose contributing deployment
    dates mostly have all-historical histories dominated by the first
    window (the finite-range artifact).
    """
    base_family, base_regime = baseline
    emdot = [r for r in records if r.staleness is not None and r.metric == metric]
    if not emdot:
        return {}
    base_index = {}
    for r in emdot:
        if r.family == base_family and r.regime == base_regime:
            base_index[(r.seed, r.t_star, r.test_time)] = r
    holes = sorted({
        (r.seed, r.t_star, r.test_time) for r in emdot
        if (r.seed, r.t_star, r.test_time) not in base_index
    })
    if holes:
        raise AggregationError(
            f"missing baseline ({base_family}, {base_regime}) cells: {holes[:10]}"
            + ("..." if len(holes) > 10 else "")
        )

    t_stars = sorted({r.t_star for r in emdot})
    horizon = max(r.test_time for r in emdot)

    def t_star_meets(t_star):
        fr = fractions.get(t_star, [])
        return 2 * sum(1 for f in fr if f >= 0.5) >= max(len(fr), 1)

    curves = {}
    for r in emdot:
        curves.setdefault((r.family, r.regime), []).append(r)

    out = {}
    for (family, regime), rs in sorted(curves.items()):
        by_staleness = {}
        excluded = {}
        for r in rs:
            base = base_index[(r.seed, r.t_star, r.test_time)]
            j = r.staleness
            if r.value is None or base.value is None:
                excluded[j] = excluded.get(j, 0) + 1
                continue
            by_staleness.setdefault(j, []).append(r.value - base.value)
        points = []
        for j in sorted(set(by_staleness) | set(excluded)):
            contributing = [t for t in t_stars if t + j <= horizon]
            meets = sum(1 for t in contributing if t_star_meets(t))
            grayed = 2 * meets >= max(len(contributing), 1)
            deltas = by_staleness.get(j, [])
            points.append(StalenessPoint(
                staleness=j,
                mean=float(np.mean(deltas)) if deltas else None,
                std=_population_std(deltas) if deltas else None,
                n=len(deltas),
                n_excluded=excluded.get(j, 0),
                grayed=grayed,
            ))
        out[(family, regime)] = points
    return out
