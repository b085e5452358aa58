"""SVG figures for the CLI reports. The CSV files stay the source of truth."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# keep text as text so the SVGs are small and diffable
plt.rcParams["svg.fonttype"] = "none"
plt.rcParams["svg.hashsalt"] = "normembed"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def loss_curves(curves: Mapping[str, Sequence[tuple[int, float]]], path, title: str = "",
                ylabel: str = "loss", log_y: bool = True) -> Path:
    """One line per labelled ``(epoch, value)`` series."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in curves.items():
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, label=label, linewidth=1)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if curves:
        ax.legend(fontsize="small")
    return _save(fig, path)


def histogram(bins: Sequence[tuple[float, float, int]], path, title: str = "") -> Path:
    """Bar chart of ``(low, high, count)`` rows, e.g. a distortion histogram."""
    fig, ax = plt.subplots(figsize=(6, 4))
    lows = [b[0] for b in bins]
    widths = [b[1] - b[0] for b in bins]
    ax.bar(lows, [b[2] for b in bins], width=widths, align="edge", edgecolor="none")
    ax.set_xlabel("d_Y / d_G - 1")
    ax.set_ylabel("pairs")
    ax.set_title(title)
    return _save(fig, path)


def series_plot(series: Mapping[str, Sequence[tuple[float, float, float]]], path, xlabel: str,
                ylabel: str, title: str = "", log_y: bool = False) -> Path:
    """Lines with error bars; each point is ``(x, mean, std)``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in series.items():
        pts = sorted(pts)
        if pts:
            xs, ms, ss = zip(*pts)
            ax.errorbar(xs, ms, yerr=ss, label=label, marker="o", markersize=3, capsize=2, linewidth=1)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if series:
        ax.legend(fontsize="small")
    return _save(fig, path)
