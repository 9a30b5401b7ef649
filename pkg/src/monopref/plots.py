"""Figure builders for the report path.

Plain `Figure` objects on the Agg canvas: no pyplot, no global state, safe
in headless and multi-process use. Every builder is a pure function of its
inputs so rendered files are reproducible.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = [
    "curve_figure",
    "reliability_figure",
    "metric_by_size_figure",
    "save_figure",
]


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig = Figure(figsize=(6.0, 4.0), dpi=100)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot()
    if title:
        ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def curve_figure(grid, fitted, oracle=None, true_h=None, title: str = "") -> Figure:
    """Fitted step function against the kernel benchmark and, when known,
    the true preference function."""
    grid = np.asarray(grid, dtype=float)
    fig, ax = _new_axes(title, "r", "h(r)")
    ax.step(grid, np.asarray(fitted, dtype=float), where="post", label="estimate")
    if oracle is not None:
        ax.plot(grid, np.asarray(oracle, dtype=float), label="kernel benchmark")
    if true_h is not None:
        ax.plot(
            grid, np.asarray(true_h, dtype=float), linestyle="--", label="truth"
        )
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left")
    return fig


def reliability_figure(confidence, accuracy, counts=None, title: str = "") -> Figure:
    """Reliability diagram: per-bin mean outcome against mean prediction,
    marker area scaled by bin count, with the y = x reference line."""
    confidence = np.asarray(confidence, dtype=float)
    accuracy = np.asarray(accuracy, dtype=float)
    fig, ax = _new_axes(title, "mean prediction", "mean outcome")
    ax.plot([0.0, 1.0], [0.0, 1.0], color="0.6", linestyle="--", linewidth=1.0)
    if counts is None:
        sizes = 25.0
    else:
        counts = np.asarray(counts, dtype=float)
        top = counts.max() if counts.size else 1.0
        sizes = 10.0 + 60.0 * counts / max(top, 1.0)
    ax.scatter(confidence, accuracy, s=sizes, alpha=0.8, edgecolors="none")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    return fig


def metric_by_size_figure(series: dict, ylabel: str, title: str = "") -> Figure:
    """One line per configuration across sample sizes; `series` maps a
    label to a (sizes, values) pair."""
    fig, ax = _new_axes(title, "N", ylabel)
    for label in sorted(series):
        sizes, values = series[label]
        ax.plot(sizes, values, marker="o", label=f"config {label}")
    ax.legend()
    return fig


def save_figure(fig: Figure, path) -> Path:
    """Render to file; strips the library version stamp so reruns match."""
    path = Path(path)
    fig.savefig(path, dpi=150, metadata={"Software": None})
    return path
