"""Minimal SVG line plots for calibration and evaluation reports.

Output is plain text so it can be diffed and checked in tests; no plotting
library is needed.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 560, 360
LEFT, RIGHT, TOP, BOTTOM = 64, 20, 36, 48
COLORS = ("#1f5fa8", "#c0392b", "#2e8b57", "#7d3c98")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Axes:
    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        self.x0, self.x1 = min(xs), max(xs)
        self.y0, self.y1 = min(ys), max(ys)
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5
        pad = 0.05 * (self.y1 - self.y0)
        self.y0 -= pad
        self.y1 += pad

    def px(self, x: float) -> float:
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y: float) -> float:
        return HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)


def line_plot(series: dict[str, tuple[Sequence[float], Sequence[float]]], title: str,
              xlabel: str, ylabel: str, hlines: dict[str, float] | None = None,
              markers: dict[str, tuple[float, float]] | None = None) -> str:
    """Render named ``(xs, ys)`` series plus optional horizontal lines and points."""
    hlines = hlines or {}
    markers = markers or {}
    all_x = [x for xs, _ in series.values() for x in xs] + [m[0] for m in markers.values()]
    all_y = ([y for _, ys in series.values() for y in ys] + list(hlines.values())
             + [m[1] for m in markers.values()])
    ax = _Axes(all_x, all_y)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{HEIGHT - BOTTOM}" x2="{WIDTH - RIGHT}" y2="{HEIGHT - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{HEIGHT - BOTTOM}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        xv = ax.x0 + i * (ax.x1 - ax.x0) / 4
        yv = ax.y0 + i * (ax.y1 - ax.y0) / 4
        out.append(f'<text x="{ax.px(xv):.1f}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{ax.py(yv) + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    for k, (name, (xs, ys)) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{ax.px(x):.1f},{ax.py(y):.1f}" for x, y in zip(xs, ys))
        out.append(f'<polyline class="series" data-name="{escape(name)}" fill="none" '
                   f'stroke="{color}" stroke-width="2" points="{pts}"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{ax.px(x):.1f}" cy="{ax.py(y):.1f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - RIGHT - 4}" y="{TOP + 14 * (k + 1)}" text-anchor="end" '
                   f'fill="{color}">{escape(name)}</text>')
    for name, y in hlines.items():
        out.append(f'<line class="hline" data-name="{escape(name)}" x1="{LEFT}" y1="{ax.py(y):.1f}" '
                   f'x2="{WIDTH - RIGHT}" y2="{ax.py(y):.1f}" stroke="gray" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{LEFT + 4}" y="{ax.py(y) - 4:.1f}" fill="gray">{escape(name)}</text>')
    for name, (x, y) in markers.items():
        out.append(f'<circle class="marker" data-name="{escape(name)}" cx="{ax.px(x):.1f}" '
                   f'cy="{ax.py(y):.1f}" r="6" fill="none" stroke="black" stroke-width="2"/>')
        out.append(f'<text x="{ax.px(x) + 8:.1f}" y="{ax.py(y) - 8:.1f}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def ovl_curve_svg(radii, ovls, threshold: float, selected: float) -> str:
    # Selected point drawn on the curve, interpolated if fractional.
    sel_y = _interp(selected, radii, ovls)
    return line_plot({"OVL": (radii, ovls)}, "OVL vs patch radius", "patch radius (px)", "OVL",
                     hlines={f"O_r = {_fmt(threshold)}": threshold},
                     markers={f"selected {_fmt(selected)}": (selected, sel_y)})


def recall_svg(radii, recalls, selected: float) -> str:
    return line_plot({"recall": (radii, recalls)}, "Recall vs patch radius", "patch radius (px)", "recall",
                     markers={f"selected {_fmt(selected)}": (selected, _interp(selected, radii, recalls))})


def m_metric_svg(radii, ms, selected: float, m_selected: float) -> str:
    return line_plot({"M": (radii, ms)}, "Efficiency metric vs patch radius", "patch radius (px)", "M",
                     markers={f"selected {_fmt(selected)}": (selected, m_selected)})


def timing_svg(radii, times) -> str:
    return line_plot({"time": (radii, times)}, "Localisation time vs patch radius",
                     "patch radius (px)", "mean time (s)")


def _interp(x: float, xs, ys) -> float:
    pts = sorted(zip(xs, ys))
    if x <= pts[0][0]:
        return pts[0][1]
    for (xa, ya), (xb, yb) in zip(pts, pts[1:]):
        if xa <= x <= xb:
            return ya + (yb - ya) * (x - xa) / (xb - xa)
    return pts[-1][1]
