"""Bare-bones SVG line plots (axes, ticks, polylines)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

_COLORS = ("#1f4e9c", "#c23b22", "#2e8b57", "#8a2be2", "#d2691e")


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** np.floor(np.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    return np.arange(np.ceil(lo / step) * step, hi + 0.5 * step, step)


def line_plot(path, series: Sequence[tuple], xlabel: str = "", ylabel: str = "",
              title: str = "", width: int = 560, height: int = 380):
    """``series`` is a list of ``(label, x, y)``; non-finite points are dropped."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 28, 48
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = (xs[ok].min(), xs[ok].max()) if ok.any() else (0.0, 1.0)
    y0, y1 = (ys[ok].min(), ys[ok].max()) if ok.any() else (0.0, 1.0)
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return pad_t + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{sx(t):.2f}" y1="{pad_t + ph}" x2="{sx(t):.2f}" '
                       f'y2="{pad_t + ph + 4}" stroke="#333"/>')
            out.append(f'<text x="{sx(t):.2f}" y="{pad_t + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{pad_l - 4}" y1="{sy(t):.2f}" x2="{pad_l}" y2="{sy(t):.2f}" '
                       f'stroke="#333"/>')
            out.append(f'<text x="{pad_l - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    for k, (label, x, y) in enumerate(series):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        m = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[m], y[m]))
        col = _COLORS[k % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.6" points="{pts}"/>')
        out.append(f'<text x="{pad_l + 8}" y="{pad_t + 14 + 14 * k}" fill="{col}">{label}</text>')
    out.append(f'<text x="{pad_l + pw / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="14" y="{pad_t + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {pad_t + ph / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{pad_l + pw / 2}" y="18" text-anchor="middle">{title}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
