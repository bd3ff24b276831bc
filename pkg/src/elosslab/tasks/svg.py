"""Minimal single-file SVG line plots for metric curves."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def line_plot(series: dict, path, title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 560, height: int = 360) -> None:
    """``series`` maps a label to ``(x, y)`` sequences; non-finite points are skipped."""
    margin = 56
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()] or [np.zeros(1)])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()] or [np.zeros(1)])
    ok = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = (xs[ok], ys[ok]) if ok.any() else (np.zeros(1), np.zeros(1))
    x0, x1 = xs.min(), xs.max() if xs.max() > xs.min() else xs.min() + 1.0
    y0, y1 = ys.min(), ys.max() if ys.max() > ys.min() else ys.min() + 1.0

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
           f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
           f'<text x="{width / 2}" y="{margin / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{height / 2}" text-anchor="middle" transform="rotate(-90 14 {height / 2})">'
           f'{escape(ylabel)}</text>']
    for v in (y0, y1):
        out.append(f'<text x="{margin - 4}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for v in (x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{height - margin + 16}" text-anchor="middle">{v:.3g}</text>')
    for k, (label, (x, y)) in enumerate(series.items()):
        colour = _COLOURS[k % len(_COLOURS)]
        pts = [(a, b) for a, b in zip(np.asarray(x, float), np.asarray(y, float))
               if np.isfinite(a) and np.isfinite(b)]
        if pts:
            coords = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}"/>')
        ly = margin + 16 * k
        out.append(f'<text x="{width - margin - 4}" y="{ly}" text-anchor="end" fill="{colour}">{escape(label)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
