"""Per-timepoint train/val/test partitions and training-regime row sets.

Every time point's rows are partitioned once into the three roles; regimes
then assemble training and validation pools from those partitions. The plan
is a pure function of (dataset, ratios, seed, grouped), so all regimes and
the all-period baseline share the same randomness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RangeError

SLIDING_WINDOW = "sliding_window"
ALL_HISTORICAL = "all_historical"
ALL_HISTORICAL_SUBSAMPLED = "all_historical_subsampled"

REGIME_KINDS = (SLIDING_WINDOW, ALL_HISTORICAL, ALL_HISTORICAL_SUBSAMPLED)

_ROLES = ("train", "val", "test")


def stable_hash(*parts) -> int:
    """Deterministic 64-bit hash of the stringified parts (not salted)."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def stable_uniform(*parts) -> float:
    return stable_hash(*parts) / 2.0 ** 64


@dataclass(frozen=True)
class SplitRatios:
    train: float
    val: float
    test: float

    def __post_init__(self):
        for name, v in (("train", self.train), ("val", self.val), ("test", self.test)):
            if not 0.0 < v < 1.0:
                raise ConfigError(f"split ratio {name}={v} must be in (0, 1)")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ConfigError("split ratios must sum to 1")

    def as_tuple(self):
        return (self.train, self.val, self.test)


@dataclass(frozen=True)
class RegimeSpec:
    kind: str
    window: int

    def __post_init__(self):
        if self.kind not in REGIME_KINDS:
            raise ConfigError(f"unknown regime kind {self.kind!r}")
        if self.window < 1:
            raise ConfigError("window must be >= 1")


def _largest_remainder_counts(n, ratios):
    """Allocate n rows to the three roles, train favored on ties."""
    exact = [r * n for r in ratios]
    base = [int(np.floor(e)) for e in exact]
    remainder = n - sum(base)  # at most 2
    # order roles by descending fractional part; priority order breaks ties
    order = sorted(range(3), key=lambda i: (-(exact[i] - base[i]), i))
    for i in range(remainder):
        base[order[i]] += 1
    return base


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint, exhaustive role assignment for every time point."""

    seed: int
    grouped: bool
    train: dict
    val: dict
    test: dict
    n_time_points: int

    def rows(self, role, t) -> np.ndarray:
        return getattr(self, role)[t]

    def role_sizes(self):
        return {
            t: tuple(len(self.rows(role, t)) for role in _ROLES)
            for t in range(1, self.n_time_points + 1)
        }


def build_split_plan(data, ratios: SplitRatios, seed: int, grouped: bool = False) -> SplitPlan:
    """Partition every time point into train/val/test.

    Ungrouped: a seeded shuffle per time point with largest-remainder role
    counts. Grouped: each group key is hashed onto [0, 1) once with the seed
    and assigned a role by the cumulative ratios, so a group keeps one role
    everywhere it appears.
    """
    T = data.n_time_points
    train, val, test = {}, {}, {}
    cut_train = ratios.train
    cut_val = ratios.train + ratios.val
    for t in range(1, T + 1):
        rows = data.rows_at(t)
        if rows.size == 0:
            raise ConfigError(f"time point {t} has no rows")
        if grouped and data.group_keys is not None:
            roles = {r: [] for r in _ROLES}
            for row in rows:
                u = stable_uniform(seed, "group", data.group_keys[row])
                role = "train" if u < cut_train else ("val" if u < cut_val else "test")
                roles[role].append(row)
            train[t] = np.array(sorted(roles["train"]), dtype=int)
            val[t] = np.array(sorted(roles["val"]), dtype=int)
            test[t] = np.array(sorted(roles["test"]), dtype=int)
        else:
            rng = np.random.default_rng(stable_hash(seed, "plan", t) % 2 ** 32)
            perm = rows[rng.permutation(rows.size)]
            n_train, n_val, _ = _largest_remainder_counts(rows.size, ratios.as_tuple())
            train[t] = np.sort(perm[:n_train])
            val[t] = np.sort(perm[n_train:n_train + n_val])
            test[t] = np.sort(perm[n_train + n_val:])
    return SplitPlan(seed=seed, grouped=grouped, train=train, val=val, test=test,
                     n_time_points=T)


def _union(parts):
    parts = [p for p in parts if p.size]
    if not parts:
        return np.empty(0, dtype=int)
    return np.sort(np.concatenate(parts))


def regime_train_val(t_star: int, regime: RegimeSpec, plan: SplitPlan):
    """Training and validation row sets for a regime at a deployment date."""
    T = plan.n_time_points
    W = regime.window
    if regime.kind == SLIDING_WINDOW:
        if not W <= t_star <= T:
            raise RangeError(f"t*={t_star} outside [{W}, {T}] for sliding window")
        span = range(t_star - W + 1, t_star + 1)
        return _union([plan.train[k] for k in span]), _union([plan.val[k] for k in span])
    if not 1 <= t_star <= T:
        raise RangeError(f"t*={t_star} outside [1, {T}]")
    span = range(1, t_star + 1)
    hist_train = _union([plan.train[k] for k in span])
    hist_val = _union([plan.val[k] for k in span])
    if regime.kind == ALL_HISTORICAL:
        return hist_train, hist_val
    # subsampled: match the sliding-window training size, validation untouched
    if t_star < W:
        raise RangeError(f"t*={t_star} below window {W} for subsampled regime")
    sw_span = range(t_star - W + 1, t_star + 1)
    target = sum(plan.train[k].size for k in sw_span)
    target = min(target, hist_train.size)
    rng = np.random.default_rng(stable_hash(plan.seed, "subsample", t_star) % 2 ** 32)
    chosen = rng.choice(hist_train, size=target, replace=False)
    return np.sort(chosen), hist_val


def test_sets(t_star: int, plan: SplitPlan, data):
    """In-period test rows and the full future slices.

    In-period is the held-out test partition at t*; every future time point
    contributes all of its rows (train, val and test partitions alike) since
    nothing after t* was available at training time.
    """
    T = plan.n_time_points
    if not 1 <= t_star <= T:
        raise RangeError(f"t*={t_star} outside [1, {T}]")
    in_period = plan.test[t_star]
    out_of_period = {k: data.rows_at(k) for k in range(t_star + 1, T + 1)}
    return in_period, out_of_period


def all_period_split(plan: SplitPlan):
    """Role unions across all time: the standard time-agnostic split."""
    ts = range(1, plan.n_time_points + 1)
    return (
        _union([plan.train[t] for t in ts]),
        _union([plan.val[t] for t in ts]),
        _union([plan.test[t] for t in ts]),
    )


def history_window_fraction(plan: SplitPlan, t_star: int, window: int) -> float:
    """Share of the all-historical training rows that lie in the first window.

    Drives the staleness graying rule: when the earliest ``window`` time
    points make up at least half of the history, the all-historical regime is
    close to the first sliding window by construction.
    """
    first = sum(plan.train[k].size for k in range(1, min(window, t_star) + 1))
    total = sum(plan.train[k].size for k in range(1, t_star + 1))
    if total == 0:
        return 1.0
    return first / total
