"""Minimal self-contained SVG line charts (no display or plotting backend)."""
from __future__ import annotations

from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#000000")
WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=80, right=150, top=40, bottom=55)


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def line_chart(series: dict, x=None, title: str = "", xlabel: str = "",
               ylabel: str = "") -> str:
    """SVG text for one line per ``series`` entry (label -> y values)."""
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    n = max(len(y) for y in ys)
    xs = np.arange(n, dtype=float) if x is None else np.asarray(x, dtype=float)
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.zeros(1)
    y_lo, y_hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(xs.min()), float(xs.max()) if xs.size > 1 else float(xs.min()) + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo or 1.0) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           f'fill="none" stroke="#444"/>']
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(t) + 4:.1f}" '
                   f'text-anchor="end">{t:.4g}</text>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(t):.1f}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{t:.4g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>')
    for k, (label, y) in enumerate(zip(series, ys)):
        colour = PALETTE[k % len(PALETTE)]
        # thin very long traces so the file stays small
        step = max(1, len(y) // 2000)
        pts = " ".join(f"{sx(xs[i]):.1f},{sy(y[i]):.1f}"
                       for i in range(0, len(y), step) if np.isfinite(y[i]))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
