"""Static SVG renderings of the diagnostic panels.

SVGs are presentation-only; the JSON/CSV files are the stable contract.
Matplotlib is pinned to the Agg backend with a fixed hash salt and no date
metadata so repeated renders of the same inputs stay byte-identical on one
matplotlib version.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "hindcast"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_diagnostics(report, out_dir):
    out = Path(out_dir)
    _importance_panels(report, out)
    _prevalence_panel(report, out)
    _max_drop_panel(report, out)
    _missingness_heatmap(report, out)


def _importance_panels(report, out):
    for regime, matrix in sorted(report.importance.items()):
        fig, ax = plt.subplots(figsize=(7, 4))
        union = set(report.feature_union.get(regime, []))
        for feature in sorted(union):
            series = matrix.get(feature, {})
            ts = sorted(series)
            heavier = report.highlights.get(feature, False)
            ax.plot(ts, [series[t] for t in ts],
                    linewidth=2.4 if heavier else 0.9,
                    alpha=1.0 if heavier else 0.6,
                    label=feature)
        ax.set_xlabel("deployment date")
        ax.set_ylabel("|coefficient|")
        ax.set_title(f"feature importance over deployment dates ({regime})")
        if union:
            ax.legend(fontsize=5, ncol=2, loc="upper right")
        _save(fig, out / f"importance_{regime}.svg")


def _prevalence_panel(report, out):
    fig, ax = plt.subplots(figsize=(7, 4))
    T = len(report.time_labels)
    ts = list(range(1, T + 1))
    for feature, series in sorted(report.categorical_prevalence.items()):
        heavier = report.highlights.get(feature, False)
        ax.plot(ts, [v if v is not None else float("nan") for v in series],
                linewidth=2.4 if heavier else 0.9,
                alpha=1.0 if heavier else 0.6,
                label=feature)
    ax.set_xlabel("time point")
    ax.set_ylabel("positive proportion")
    ax.set_title("dummy-feature prevalence over time")
    if report.categorical_prevalence:
        ax.legend(fontsize=5, ncol=2, loc="upper right")
    _save(fig, out / "prevalence.svg")


def _max_drop_panel(report, out):
    fig, ax = plt.subplots(figsize=(7, 3.2))
    for regime, drops in sorted(report.max_drop.items()):
        ts = sorted(t for t, v in drops.items() if v is not None)
        ax.plot(ts, [drops[t] for t in ts], marker="o", markersize=3, label=regime)
    ax.axhline(0.0, linewidth=0.6, color="gray")
    ax.set_xlabel("deployment date")
    ax.set_ylabel("max AUROC drop")
    ax.set_title("largest future decline per deployment date")
    ax.legend(fontsize=7)
    _save(fig, out / "max_drop.svg")


def _missingness_heatmap(report, out):
    fig, ax = plt.subplots(figsize=(7, 0.35 * max(len(report.missingness_columns), 4) + 1.2))
    # darker cell = larger missing fraction
    im = ax.imshow(report.missingness, aspect="auto", cmap="Greys", vmin=0.0, vmax=1.0)
    ax.set_yticks(range(len(report.missingness_columns)))
    ax.set_yticklabels(report.missingness_columns, fontsize=5)
    ax.set_xticks(range(len(report.time_labels)))
    ax.set_xticklabels(report.time_labels, fontsize=5, rotation=90)
    ax.set_title("missing fraction per column and time point")
    fig.colorbar(im, ax=ax, shrink=0.8)
    _save(fig, out / "missingness.svg")


def render_staleness(curves_by_metric, out_dir):
    """Delta-vs-staleness curves with grayed stalenesses shaded."""
    out = Path(out_dir)
    for metric, curves in curves_by_metric.items():
        fig, ax = plt.subplots(figsize=(7, 4))
        grayed = set()
        for (family, regime), points in sorted(curves.items()):
            js = [p.staleness for p in points if p.mean is not None]
            means = [p.mean for p in points if p.mean is not None]
            stds = [p.std for p in points if p.mean is not None]
            ax.errorbar(js, means, yerr=stds, marker="o", markersize=3,
                        capsize=2, label=f"{family} / {regime}")
            grayed.update(p.staleness for p in points if p.grayed)
        for j in sorted(grayed):
            ax.axvspan(j - 0.5, j + 0.5, color="gray", alpha=0.18, linewidth=0)
        ax.axhline(0.0, linewidth=0.6, color="gray")
        ax.set_xlabel("staleness (time points since deployment)")
        ax.set_ylabel(f"{metric} delta vs baseline")
        ax.set_title(f"{metric} vs staleness (shaded: first-window-dominated)")
        ax.legend(fontsize=6)
        _save(fig, out / f"staleness_{metric}.svg")


def render_over_time(records, out_dir, family="lr", metric="auroc",
                     regime="all_historical"):
    """Fan chart: one line per deployment date, all-period reference dotted."""
    import numpy as np

    out = Path(out_dir)
    cells = {}
    ap = {}
    for r in records:
        if r.family != family or r.metric != metric or r.value is None:
            continue
        if r.regime == "all_period" and r.test_time is not None:
            ap.setdefault(r.test_time, []).append(r.value)
        elif r.regime == regime and r.staleness is not None:
            cells.setdefault((r.t_star, r.test_time), []).append(r.value)
    fig, ax = plt.subplots(figsize=(7, 4))
    t_stars = sorted({ts for ts, _ in cells})
    cmap = plt.get_cmap("viridis")
    for i, t_star in enumerate(t_stars):
        ks = sorted(k for ts, k in cells if ts == t_star)
        means = [float(np.mean(cells[(t_star, k)])) for k in ks]
        color = cmap(i / max(len(t_stars) - 1, 1))
        ax.plot(ks, means, color=color, linewidth=0.9)
        ax.plot([ks[0]], [means[0]], marker="o", markersize=3.5, color=color)
    if ap:
        ks = sorted(ap)
        ax.plot(ks, [float(np.mean(ap[k])) for k in ks], "r:",
                linewidth=1.8, label="all-period reference")
        ax.legend(fontsize=7)
    ax.set_xlabel("test time point")
    ax.set_ylabel(metric)
    ax.set_title(f"{metric} over time ({family}, {regime}); dots mark deployment dates")
    _save(fig, out / f"over_time_{family}_{regime}_{metric}.svg")
    return out
