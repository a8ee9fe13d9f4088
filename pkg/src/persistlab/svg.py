"""Minimal self-contained SVG charts: one line plot, one heatmap."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=80, right=30, top=40, bottom=60)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _frame(title: str, xlabel: str, ylabel: str, body: list[str], extra: str = "") -> str:
    m = MARGIN
    x0, y0 = m["left"], HEIGHT - m["bottom"]
    x1, y1 = WIDTH - m["right"], m["top"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text class="title" x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        *body,
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text class="xlabel" x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text class="ylabel" x="20" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 20 {(y0 + y1) / 2})">{escape(ylabel)}</text>',
        extra,
        "</svg>",
    ]
    return "\n".join(p for p in parts if p) + "\n"


def _scale(lo: float, hi: float, p0: float, p1: float, log: bool):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi = lo + 1.0

    def f(v):
        v = math.log10(v) if log else v
        return p0 + (v - lo) / (hi - lo) * (p1 - p0)

    return f


def _ticks(lo: float, hi: float, n: int, log: bool) -> list[float]:
    if log:
        return list(np.geomspace(lo, hi, n)) if hi > lo else [lo]
    return list(np.linspace(lo, hi, n)) if hi > lo else [lo]


def line_chart(x: Sequence[float], y: Sequence[float], xlabel: str, ylabel: str, title: str = "",
               logx: bool = False) -> str:
    m = MARGIN
    px = _scale(min(x), max(x), m["left"], WIDTH - m["right"], logx)
    py = _scale(min(y), max(y), HEIGHT - m["bottom"], m["top"], False)
    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
    body = [f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{pts}"/>']
    ticks = []
    for v in _ticks(min(x), max(x), 5, logx):
        ticks.append(f'<text class="xtick" x="{px(v):.2f}" y="{HEIGHT - m["bottom"] + 18}" text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(min(y), max(y), 5, False):
        ticks.append(f'<text class="ytick" x="{m["left"] - 6}" y="{py(v):.2f}" text-anchor="end">{_fmt(v)}</text>')
    return _frame(title, xlabel, ylabel, body, "\n".join(ticks))


def _color(f: float) -> str:
    # white -> dark blue
    f = min(1.0, max(0.0, f))
    r = int(round(255 * (1 - 0.9 * f)))
    g = int(round(255 * (1 - 0.7 * f)))
    return f"#{r:02x}{g:02x}ff" if f < 1 else "#1a4cff"


def heatmap(xs: Sequence[float], ys: Sequence[float], z: np.ndarray, xlabel: str, ylabel: str,
            title: str = "", zlabel: str = "") -> str:
    """``z[i, j]`` is drawn at ``(xs[j], ys[i])`` with log-scaled axes."""
    m = MARGIN
    nx, ny = len(xs), len(ys)
    w = (WIDTH - m["left"] - m["right"]) / nx
    h = (HEIGHT - m["top"] - m["bottom"]) / ny
    finite = z[np.isfinite(z)]
    zlo, zhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    body = []
    for i in range(ny):
        for j in range(nx):
            v = z[i, j]
            fill = "#cccccc" if not np.isfinite(v) else _color((v - zlo) / (zhi - zlo) if zhi > zlo else 0.5)
            x = m["left"] + j * w
            y = HEIGHT - m["bottom"] - (i + 1) * h
            body.append(f'<rect class="cell" x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}"/>')
    ticks = []
    for j in sorted({0, nx // 2, nx - 1}):
        ticks.append(f'<text class="xtick" x="{m["left"] + (j + 0.5) * w:.2f}" y="{HEIGHT - m["bottom"] + 18}" text-anchor="middle">{_fmt(xs[j])}</text>')
    for i in sorted({0, ny // 2, ny - 1}):
        ticks.append(f'<text class="ytick" x="{m["left"] - 6}" y="{HEIGHT - m["bottom"] - (i + 0.5) * h:.2f}" text-anchor="end">{_fmt(ys[i])}</text>')
    ticks.append(f'<text class="zrange" x="{WIDTH - m["right"]}" y="24" text-anchor="end">{escape(zlabel)} in [{_fmt(zlo)}, {_fmt(zhi)}]</text>')
    return _frame(title, xlabel + " (log scale)", ylabel + " (log scale)", body, "\n".join(ticks))
