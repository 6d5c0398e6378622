"""Matplotlib figures of a graphic, for reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .render import EFFECT_COLORS  # noqa: E402


def plot_graphic(g, report=None, ax=None):
    if ax is None:
        _, ax = plt.subplots(figsize=(6, 6))
    span = max(np.ptp(np.concatenate([a.points for lp in g.loops for a in lp.arcs]), axis=0))
    off = 0.015 * span
    for lp in g.loops:
        for arc in lp.arcs:
            p = arc.points
            if arc.label == "d" and len(p) > 1:
                d = np.gradient(p, axis=0)
                n = np.column_stack([-d[:, 1], d[:, 0]])
                n /= np.maximum(np.hypot(n[:, 0], n[:, 1]), 1e-300)[:, None]
                s = p + (off if arc.gray_side == "left" else -off) * n
                ax.plot(s[:, 0], s[:, 1], color="0.75", lw=5, solid_capstyle="butt", zorder=1)
            ax.plot(p[:, 0], p[:, 1], color="k", lw=1.2, ls="-" if arc.label == "d" else "--", zorder=2)
    if report is not None:
        for n, ev in enumerate(report.events, start=1):
            if ev.kind == "crossing_ref":
                continue
            ax.scatter(*ev.position, s=80, color=EFFECT_COLORS[ev.effect], zorder=3)
            ax.annotate(str(n), ev.position, ha="center", va="center", fontsize=7, color="w", zorder=4)
        ax.set_title(f"{report.variant}: {report.stab_count} stab, {report.destab_count} destab")
    ax.set_xlabel("f")
    ax.set_ylabel("g")
    ax.set_aspect("equal")
    return ax


def save_png(g, path, report=None):
    fig, ax = plt.subplots(figsize=(6, 6))
    plot_graphic(g, report, ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
