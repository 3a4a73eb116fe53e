"""Minimal static SVG line plots with optional log-log slope annotation."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .textio import Table

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=30, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class PlotError(ValueError):
    pass


def _num(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 8)
        return [float(v) for v in range(a, b + 1, step)]
    span = hi - lo
    raw = span / 5 if span > 0 else 1.0
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _label(v: float, log: bool) -> str:
    return f"1e{int(v)}" if log else f"{v:.3g}"


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def render(table: Table, x: str, ys: Sequence[str], log: bool = True, title: str = "") -> str:
    """SVG text for columns ``ys`` against ``x``; a pure function of the table."""
    if table.data.shape[0] == 0:
        raise PlotError("no data rows to plot")
    for c in (x, *ys):
        if c not in table.columns:
            raise PlotError(f"unknown column {c!r}; have {', '.join(table.columns)}")
    xv = table.column(x)
    series = []
    for c in ys:
        yv = table.column(c)
        keep = np.isfinite(xv) & np.isfinite(yv)
        if log:
            keep &= (xv > 0) & (yv > 0)
        if not keep.any():
            raise PlotError(f"column {c!r} has no plottable points")
        px, py = xv[keep], yv[keep]
        order = np.argsort(px, kind="stable")
        series.append((c, px[order], py[order]))
    tx = (lambda v: np.log10(v)) if log else (lambda v: v)
    all_x = np.concatenate([tx(s[1]) for s in series])
    all_y = np.concatenate([tx(s[2]) for s in series])
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           'fill="none" stroke="black"/>']
    for v in _ticks(x0, x1, log):
        if x0 - 1e-12 <= v <= x1 + 1e-12:
            px = _num(sx(v))
            out.append(f'<line x1="{px}" y1="{MARGIN["top"] + ph}" x2="{px}" '
                       f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{px}" y="{MARGIN["top"] + ph + 20}" font-size="11" '
                       f'text-anchor="middle">{_label(v, log)}</text>')
    for v in _ticks(y0, y1, log):
        if y0 - 1e-12 <= v <= y1 + 1e-12:
            py = _num(sy(v))
            out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py}" x2="{MARGIN["left"]}" '
                       f'y2="{py}" stroke="black"/>')
            out.append(f'<text x="{MARGIN["left"] - 8}" y="{py}" font-size="11" '
                       f'text-anchor="end" dominant-baseline="middle">{_label(v, log)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" font-size="12" '
               f'text-anchor="middle">{x}</text>')
    if title:
        out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="18" font-size="13" '
                   f'text-anchor="middle">{title}</text>')
    for n, (name, px, py) in enumerate(series):
        color = COLORS[n % len(COLORS)]
        pts = " ".join(f"{_num(sx(a))},{_num(sy(b))}" for a, b in zip(tx(px), tx(py)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a, b in zip(tx(px), tx(py)):
            out.append(f'<circle cx="{_num(sx(a))}" cy="{_num(sy(b))}" r="2.5" fill="{color}"/>')
        label = name
        if log and px.size >= 2:
            label += f" (slope {loglog_slope(px, py):.2f})"
        ly = MARGIN["top"] + 15 + 18 * n
        lx = WIDTH - MARGIN["right"] + 10
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{lx + 22}" y="{ly}" font-size="11" '
                   f'dominant-baseline="middle">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
