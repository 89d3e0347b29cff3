"""Minimal self-contained SVG line charts with optional log axes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray


def _num(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        step = max(1, (b - a) // 6)
        return [10.0 ** k for k in range(a, b + 1, step) if lo <= 10.0 ** k <= hi]
    return list(np.linspace(lo, hi, 5))


def line_chart(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "",
               logx: bool = True, logy: bool = False, width: int = 480, height: int = 320) -> str:
    """Render polylines into an SVG document string.

    Non-positive values are dropped on log axes.  Output depends only on the
    inputs, so repeated runs give identical bytes.
    """
    left, right, top, bottom = 64, 16, 28, 44
    pw, ph = width - left - right, height - top - bottom

    def keep(s: Series):
        x, y = np.asarray(s.x, float), np.asarray(s.y, float)
        m = np.isfinite(x) & np.isfinite(y)
        if logx:
            m &= x > 0
        if logy:
            m &= y > 0
        return x[m], y[m]

    data = [(s.label, *keep(s)) for s in series]
    xs = np.concatenate([d[1] for d in data]) if data else np.array([1.0])
    ys = np.concatenate([d[2] for d in data]) if data else np.array([1.0])
    if xs.size == 0:
        xs, ys = np.array([1.0]), np.array([1.0])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi <= x_lo:
        x_hi = x_lo * 10 if logx else x_lo + 1
    if y_hi <= y_lo:
        pad = abs(y_lo) * 0.1 or 1.0
        y_lo, y_hi = (y_lo / 2, y_lo * 2) if logy else (y_lo - pad, y_hi + pad)

    fx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    fy = (lambda v: math.log10(v)) if logy else (lambda v: v)
    x0, x1, y0, y1 = fx(x_lo), fx(x_hi), fy(y_lo), fy(y_hi)

    def px(v):
        return left + (fx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (fy(v) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x_lo, x_hi, logx):
        x = px(v)
        out.append(f'<line x1="{_num(x)}" y1="{top + ph}" x2="{_num(x)}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_num(x)}" y="{top + ph + 16}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in _ticks(y_lo, y_hi, logy):
        y = py(v)
        out.append(f'<line x1="{left - 4}" y1="{_num(y)}" x2="{left}" y2="{_num(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_num(y + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2})">{escape(ylabel)}</text>')
    for k, (label, x, y) in enumerate(data):
        color = PALETTE[k % len(PALETTE)]
        if x.size:
            pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 12 + 13 * k
        out.append(f'<line x1="{left + pw - 90}" y1="{ly - 4}" x2="{left + pw - 74}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw - 70}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str, svg: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
