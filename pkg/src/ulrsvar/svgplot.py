"""Minimal SVG line and band plots for diagnostics (no charting dependency)."""
from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return np.full_like(np.asarray(v, dtype=float), 0.5 * (a + b))
    return a + (np.asarray(v, dtype=float) - lo) * (b - a) / (hi - lo)


def line_plot(series: dict, title: str = "", bands: dict | None = None, width: int = 640, height: int = 360) -> str:
    """Render ``{label: (x, y)}`` lines and optional ``{label: (x, lower, upper)}`` shaded bands."""
    bands = bands or {}
    xs = [np.asarray(x, float) for x, _ in series.values()] + [np.asarray(b[0], float) for b in bands.values()]
    ys = [np.asarray(y, float) for _, y in series.values()]
    ys += [np.asarray(b[1], float) for b in bands.values()] + [np.asarray(b[2], float) for b in bands.values()]
    allx = np.concatenate(xs) if xs else np.zeros(1)
    ally = np.concatenate(ys) if ys else np.zeros(1)
    allx, ally = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    left, right, top, bottom = 60, width - 20, 30, height - 40

    def pts(x, y):
        px, py = _scale(x, x0, x1, left, right), _scale(y, y0, y1, bottom, top)
        ok = np.isfinite(px) & np.isfinite(py)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px[ok], py[ok]))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{left}" y="{bottom + 15}">{x0:.4g}</text>',
        f'<text x="{right}" y="{bottom + 15}" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{left - 4}" y="{bottom}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{left - 4}" y="{top + 8}" text-anchor="end">{y1:.4g}</text>',
    ]
    for i, (label, (x, lo, hi)) in enumerate(bands.items()):
        x = np.asarray(x, float)
        poly = pts(x, lo) + " " + pts(x[::-1], np.asarray(hi, float)[::-1])
        out.append(f'<polygon points="{poly}" fill="{_COLORS[i % len(_COLORS)]}" fill-opacity="0.2" stroke="none"><title>{escape(label)}</title></polygon>')
    for i, (label, (x, y)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline points="{pts(x, y)}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        out.append(f'<text x="{right - 4}" y="{top + 14 * (i + 1)}" text-anchor="end" fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save(svg: str, path) -> Path:
    path = Path(path)
    path.write_text(svg)
    return path
