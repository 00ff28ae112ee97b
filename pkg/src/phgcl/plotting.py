"""Matplotlib defaults and helpers for report figures.

Figures are built on :class:`matplotlib.figure.Figure` directly so no GUI
backend or global pyplot state is involved.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib as mpl
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "figure.dpi": 100,
}

COLORS = {"acc": "#1f77b4", "auc": "#d62728", "sen": "#2ca02c", "spe": "#9467bd"}
LABELS = {"acc": "ACC", "auc": "AUC", "sen": "SEN", "spe": "SPE"}


def figsize(scale: float = 1.0, aspect: float | None = None) -> tuple[float, float]:
    width = 5.5 * scale
    aspect = (math.sqrt(5.0) - 1.0) / 2.0 if aspect is None else aspect
    return width, width * aspect


def style():
    """Context manager applying :data:`STYLE`; build and save figures inside it."""
    return mpl.rc_context(STYLE)


def new_figure(nrows: int = 1, ncols: int = 1, scale: float = 1.0, aspect: float | None = None):
    fig = Figure(figsize=figsize(scale, aspect), layout="constrained")
    return fig, fig.subplots(nrows, ncols, squeeze=False)


def save(fig: Figure, path) -> Path:
    """Write a PNG without a software stamp so repeated runs produce identical bytes."""
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    return path
