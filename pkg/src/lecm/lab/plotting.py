"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (5 ** 0.5 - 1) / 2
FIG_WIDTH = 4.8

STYLE = {
    "figure.figsize": (FIG_WIDTH, FIG_WIDTH * GOLDEN + 0.4),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "mathtext.fontset": "stix",
    "axes.prop_cycle": matplotlib.cycler(
        color=["#08589e", "#2b8cbe", "#4eb3d3", "#7bccc4", "#a8ddb5", "#d95f02", "#7570b3"]),
}

LABELS = {
    "R": r"distance $R$",
    "sbar": r"$\bar{S}$",
    "j2": r"$j_2$",
    "xi": r"$\xi_E$",
    "step": "accepted step",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def sweep_figure(rows, path, residual: float = 0.5) -> Path:
    by_j2 = defaultdict(list)
    for row in rows:
        by_j2[row.j2].append((row.R, row.sbar))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for j2, pts in sorted(by_j2.items()):
            r, s = zip(*sorted(pts))
            ax.plot(r, s, "o-", label=rf"$j_2 = {j2:g}$")
        ax.axhline(residual, ls="--", color="0.5", lw=0.8)
        ax.set_xlabel(LABELS["R"])
        ax.set_ylabel(LABELS["sbar"])
        ax.legend()
        return _save(fig, path)


def length_figure(estimates, path) -> Path:
    pts = [(e.j2, e.xi) for e in estimates if e.defined]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if pts:
            j2, xi = zip(*pts)
            ax.plot(j2, xi, "s-")
        ax.set_xlabel(LABELS["j2"])
        ax.set_ylabel(LABELS["xi"])
        return _save(fig, path)


def trajectory_figure(trajectory, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(range(len(trajectory)), trajectory, "-")
        ax.set_xlabel(LABELS["step"])
        ax.set_ylabel(LABELS["sbar"])
        return _save(fig, path)
