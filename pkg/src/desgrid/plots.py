"""Figure rendering for aggregated batch results.

Uses the Agg backend so figures render straight to files on headless hosts.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiments import AggregateResults

_STYLE = {
    "none": ("black", "o", "No control"),
    "modular": ("tab:blue", "s", "Modular"),
    "central": ("tab:red", "^", "Central emergency"),
}


def _style(mode: str) -> tuple[str, str, str]:
    return _STYLE.get(mode, ("tab:gray", "x", mode))


def _plot_ccd(
    agg: AggregateResults,
    table: dict[str, tuple[tuple[float, float], ...]],
    xlabel: str,
    path,
) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    drew = False
    for mode in agg.modes:
        pts = [(x, f) for x, f in table[mode] if x > 0]  # log axes drop zeros
        if not pts:
            continue
        xs, fs = zip(*pts)
        color, marker, label = _style(mode)
        ax.loglog(xs, fs, color=color, marker=marker, markersize=4,
                  linewidth=1.2, label=label)
        drew = True
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fraction of scenarios >= x")
    ax.grid(True, which="both", alpha=0.3)
    if drew:
        ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_ccd_blackout(agg: AggregateResults, path) -> Path:
    return _plot_ccd(agg, agg.ccd_blackout, "MW lost", path)


def plot_ccd_trips(agg: AggregateResults, path) -> Path:
    return _plot_ccd(agg, agg.ccd_trips, "line outages", path)


def plot_losses(agg: AggregateResults, path) -> Path:
    """Per-scenario total MW lost by scenario id, one series per mode."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for mode in agg.modes:
        rows = [r for r in agg.results[mode] if not r.failed]
        if not rows:
            continue
        color, marker, label = _style(mode)
        ax.plot(
            [r.scenario_id for r in rows],
            [r.mw_lost_total for r in rows],
            color=color, marker=marker, markersize=3, linewidth=0.6,
            alpha=0.8, label=label,
        )
    ax.set_xlabel("scenario id")
    ax.set_ylabel("MW lost (total)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_report_figures(agg: AggregateResults, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        plot_ccd_blackout(agg, out / "ccd_blackout.png"),
        plot_ccd_trips(agg, out / "ccd_trips.png"),
        plot_losses(agg, out / "losses.png"),
    ]
