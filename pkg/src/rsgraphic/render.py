"""Deterministic SVG drawing of a graphic and its scan events."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .graphic import Graphic

SIZE = 640
MARGIN = 48
MAX_POINTS = 400
EFFECT_COLORS = {"stabilization": "#1b9e3a", "destabilization": "#d0342c", "none": "#7f7f7f"}
KIND_MARKS = {"horizontal": "#3d5a98", "vertical": "#8e44ad", "cusp": "#e67e22", "inflection": "#16a085",
              "crossing_ref": "#555555"}


def _fmt(x):
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


class _Frame:
    def __init__(self, g: Graphic):
        (f0, f1), (g0, g1) = g.bounding_box
        span = max(f1 - f0, g1 - g0, 1e-9)
        self.scale = (SIZE - 2 * MARGIN) / span
        self.cf, self.cg = 0.5 * (f0 + f1), 0.5 * (g0 + g1)

    def __call__(self, p):
        x = SIZE / 2 + (p[0] - self.cf) * self.scale
        y = SIZE / 2 - (p[1] - self.cg) * self.scale
        return x, y


def _thin(points):
    if len(points) <= MAX_POINTS:
        return points
    idx = np.unique(np.linspace(0, len(points) - 1, MAX_POINTS).round().astype(int))
    return points[idx]


def _path(points, frame):
    return " ".join(("M" if i == 0 else "L") + f"{_fmt(x)},{_fmt(y)}" for i, (x, y) in enumerate(map(frame, points)))


def _shade(points, side, frame, offset=5.0):
    """Polyline shifted a few pixels toward the gray side (screen coordinates)."""
    scr = np.array([frame(p) for p in points])
    if len(scr) < 2:
        return None
    d = np.gradient(scr, axis=0)
    norm = np.hypot(d[:, 0], d[:, 1])
    norm[norm == 0] = 1.0
    # screen y points down, so the image-plane left normal is (d_y, -d_x) here
    left = np.column_stack([d[:, 1], -d[:, 0]]) / norm[:, None]
    shifted = scr + (offset if side == "left" else -offset) * left
    return " ".join(("M" if i == 0 else "L") + f"{_fmt(x)},{_fmt(y)}" for i, (x, y) in enumerate(shifted))


def render_svg(g: Graphic, report=None, title=None) -> str:
    frame = _Frame(g)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    out.append('<g class="gray">')
    for lp in g.loops:
        for arc in lp.arcs:
            if arc.label == "d":
                d = _shade(_thin(arc.points), arc.gray_side, frame)
                if d:
                    out.append(f'<path d="{d}" fill="none" stroke="#bdbdbd" stroke-width="8" stroke-opacity="0.6"/>')
    out.append("</g>")
    out.append('<g class="arcs">')
    for li, lp in enumerate(g.loops):
        for k, arc in enumerate(lp.arcs):
            dash = ' stroke-dasharray="6,4"' if arc.label == "i" else ""
            out.append(f'<path class="arc-{arc.label}" data-loop="{li}" data-arc="{k}" d="{_path(_thin(arc.points), frame)}" '
                       f'fill="none" stroke="#111111" stroke-width="1.6"{dash}/>')
    out.append("</g>")
    out.append('<g class="features">')
    for li, lp in enumerate(g.loops):
        for ft in lp.features:
            x, y = frame(ft.position)
            out.append(f'<circle class="feature {ft.kind}" cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.5" fill="{KIND_MARKS[ft.kind]}"/>')
    out.append("</g>")
    if report is not None:
        out.append(f'<g class="events" data-variant="{report.variant}">')
        for n, ev in enumerate(report.events, start=1):
            if ev.kind == "crossing_ref":
                continue
            x, y = frame(ev.position)
            color = EFFECT_COLORS[ev.effect]
            out.append(f'<g class="event {ev.effect}" data-rule="{ev.rule}">'
                       f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="7" fill="{color}" fill-opacity="0.85"/>'
                       f'<text x="{_fmt(x)}" y="{_fmt(y + 3.5)}" font-family="monospace" font-size="9" '
                       f'text-anchor="middle" fill="#ffffff">{n}</text></g>')
        out.append("</g>")
        out.append(f'<text x="8" y="{SIZE - 10}" font-family="monospace" font-size="12" fill="#111111">'
                   f'{report.variant}: {report.stab_count} stab, {report.destab_count} destab</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def event_trace_render(report, g: Graphic) -> str:
    return render_svg(g, report)
