"""Minimal deterministic SVG line charts (linear or log-log axes)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 90, 30, 50, 70
FONT = 'font-family="sans-serif" font-size="12pt"'
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


class PlotError(ValueError):
    pass


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    markers: bool = False
    line: bool = True


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo - 1e-9 <= k <= hi + 1e-9]


def line_chart(
    series: Sequence[Series],
    *,
    loglog: bool = False,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Render ``series`` as an 800x600 SVG document.

    Points that are non-finite (or non-positive on log axes) are skipped and
    break the polyline. Raises :class:`PlotError` when nothing is plottable.
    """
    tf = (lambda v: math.log10(v)) if loglog else (lambda v: v)

    def ok(v):
        return v is not None and math.isfinite(v) and (v > 0 if loglog else True)

    segs_all = []
    for s in series:
        segs, cur = [], []
        for xv, yv in zip(s.x, s.y):
            if ok(xv) and ok(yv):
                cur.append((tf(xv), tf(yv)))
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        segs_all.append(segs)
    pts = [pt for segs in segs_all for seg in segs for pt in seg]
    if not pts:
        raise PlotError("no plottable points")

    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN_T + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    if loglog:
        xt = [(math.log10(v), v) for v in _log_ticks(x0, x1)]
        yt = [(math.log10(v), v) for v in _log_ticks(y0, y1)]
    else:
        xt = [(v, v) for v in _nice_ticks(x0, x1)]
        yt = [(v, v) for v in _nice_ticks(y0, y1)]
    for pos, val in xt:
        px = _fmt(sx(pos))
        out.append(f'<line x1="{px}" y1="{MARGIN_T + ph}" x2="{px}" y2="{MARGIN_T + ph + 6}" stroke="black"/>')
        out.append(
            f'<text x="{px}" y="{MARGIN_T + ph + 24}" text-anchor="middle" {FONT}>'
            f"{escape(_tick_label(val))}</text>"
        )
    for pos, val in yt:
        py = _fmt(sy(pos))
        out.append(f'<line x1="{MARGIN_L - 6}" y1="{py}" x2="{MARGIN_L}" y2="{py}" stroke="black"/>')
        out.append(
            f'<text x="{MARGIN_L - 10}" y="{py}" text-anchor="end" dominant-baseline="middle" {FONT}>'
            f"{escape(_tick_label(val))}</text>"
        )
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="28" text-anchor="middle" {FONT}>{escape(title)}</text>')
    if xlabel:
        out.append(
            f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 18}" text-anchor="middle" {FONT}>{escape(xlabel)}</text>'
        )
    if ylabel:
        cy = MARGIN_T + ph / 2
        out.append(
            f'<text x="20" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 20 {cy:.2f})" {FONT}>'
            f"{escape(ylabel)}</text>"
        )

    for i, (s, segs) in enumerate(zip(series, segs_all)):
        color = PALETTE[i % len(PALETTE)]
        for seg in segs:
            if s.line and len(seg) >= 2:
                coords = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in seg)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
            if s.markers or len(seg) == 1:
                for a, b in seg:
                    out.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="3.5" fill="{color}"/>')
        ly = MARGIN_T + 18 + 20 * i
        lx = MARGIN_L + pw - 200
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{lx + 30}" y="{ly}" dominant-baseline="middle" {FONT}>{escape(s.label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
