"""Minimal SVG line and scatter plots written directly as text."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_plot", "scatter_plot"]

_W, _H, _PAD = 640, 480, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _transform(values, log):
    values = np.asarray(values, dtype=float)
    if log:
        values = np.where(values > 0, values, np.nan)
        return np.log10(values)
    return values


def _frame(xs, ys, title, xlabel, ylabel):
    xlo, xhi = np.nanmin(xs), np.nanmax(xs)
    ylo, yhi = np.nanmin(ys), np.nanmax(ys)
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    if yhi == ylo:
        ylo, yhi = ylo - 1, yhi + 1

    def px(x):
        return _PAD + (x - xlo) / (xhi - xlo) * (_W - 2 * _PAD)

    def py(y):
        return _H - _PAD - (y - ylo) / (yhi - ylo) * (_H - 2 * _PAD)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_PAD / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{_W / 2}" y="{_H - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 15 {_H / 2})">{escape(ylabel)}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 15}" text-anchor="middle">{xlo:.3g}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 15}" text-anchor="middle">{xhi:.3g}</text>',
        f'<text x="{_PAD - 5}" y="{_H - _PAD}" text-anchor="end">{ylo:.3g}</text>',
        f'<text x="{_PAD - 5}" y="{_PAD + 4}" text-anchor="end">{yhi:.3g}</text>',
    ]
    return parts, px, py


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> str:
    """``series`` maps a label to ``(x, y)`` arrays.  Log axes are base 10."""
    data = {k: (_transform(x, logx), _transform(y, logy)) for k, (x, y) in series.items()}
    allx = np.concatenate([d[0] for d in data.values()])
    ally = np.concatenate([d[1] for d in data.values()])
    xlabel = f"log10 {xlabel}" if logx else xlabel
    ylabel = f"log10 {ylabel}" if logy else ylabel
    parts, px, py = _frame(allx, ally, title, xlabel, ylabel)
    for n, (label, (x, y)) in enumerate(data.items()):
        color = _COLORS[n % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y) if math.isfinite(a) and math.isfinite(b))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _PAD - 5}" y="{_PAD + 16 * (n + 1)}" text-anchor="end" fill="{color}">{escape(str(label))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_plot(points, title: str = "", xlabel: str = "Re", ylabel: str = "Im",
                 unit_circle: bool = False) -> str:
    points = np.asarray(points, dtype=complex)
    xs, ys = points.real, points.imag
    if unit_circle:
        xs = np.concatenate([xs, [-1.0, 1.0]])
        ys = np.concatenate([ys, [-1.0, 1.0]])
    parts, px, py = _frame(xs, ys, title, xlabel, ylabel)
    if unit_circle:
        cx, cy = px(0.0), py(0.0)
        parts.append(f'<ellipse cx="{cx:.2f}" cy="{cy:.2f}" rx="{px(1.0) - cx:.2f}" ry="{cy - py(1.0):.2f}" fill="none" stroke="gray" stroke-dasharray="4 3"/>')
    for z in points:
        parts.append(f'<circle cx="{px(z.real):.2f}" cy="{py(z.imag):.2f}" r="2" fill="{_COLORS[0]}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
