"""Deterministic SVG scatter plots (factor returns against a benchmark).

Hand-rolled SVG keeps the output byte-stable for golden-file tests: fixed
canvas, shared square axes from the data range, a 45-degree identity line,
and fixed-precision coordinates.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

CANVAS = 640
MARGIN = 64
PLOT = CANVAS - 2 * MARGIN
N_TICKS = 5


def scatter_svg(x: np.ndarray, y: np.ndarray, x_label: str, y_label: str,
                title: str) -> str:
    """Square scatter of paired observations with the identity line drawn."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size or x.size == 0:
        raise DataError("scatter needs equal-length non-empty vectors")

    lo = float(min(x.min(), y.min()))
    hi = float(max(x.max(), y.max()))
    if lo == hi:
        pad = abs(lo) * 0.1 or 0.01
    else:
        pad = (hi - lo) * 0.05
    lo -= pad
    hi += pad
    span = hi - lo

    def px(v: float) -> float:
        return MARGIN + (v - lo) / span * PLOT

    def py(v: float) -> float:
        return CANVAS - MARGIN - (v - lo) / span * PLOT

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="white"/>',
        f'<text x="{CANVAS / 2:.2f}" y="28" text-anchor="middle" '
        f'font-family="monospace" font-size="16">{title}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" '
        f'fill="none" stroke="black" stroke-width="1"/>',
    ]

    for i in range(N_TICKS):
        v = lo + span * i / (N_TICKS - 1)
        xpix, ypix = px(v), py(v)
        parts.append(
            f'<line x1="{xpix:.2f}" y1="{CANVAS - MARGIN}" x2="{xpix:.2f}" '
            f'y2="{CANVAS - MARGIN + 6}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{xpix:.2f}" y="{CANVAS - MARGIN + 22}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{v:.4f}</text>'
        )
        parts.append(
            f'<line x1="{MARGIN - 6}" y1="{ypix:.2f}" x2="{MARGIN}" y2="{ypix:.2f}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{MARGIN - 10}" y="{ypix + 4:.2f}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{v:.4f}</text>'
        )

    parts.append(
        f'<line x1="{px(lo):.2f}" y1="{py(lo):.2f}" x2="{px(hi):.2f}" y2="{py(hi):.2f}" '
        f'stroke="gray" stroke-dasharray="6,4" stroke-width="1"/>'
    )
    for xv, yv in zip(x, y):
        parts.append(
            f'<circle cx="{px(float(xv)):.2f}" cy="{py(float(yv)):.2f}" r="3" '
            f'fill="steelblue" fill-opacity="0.7"/>'
        )
    parts.append(
        f'<text x="{CANVAS / 2:.2f}" y="{CANVAS - 16}" text-anchor="middle" '
        f'font-family="monospace" font-size="13">{x_label}</text>'
    )
    parts.append(
        f'<text x="20" y="{CANVAS / 2:.2f}" text-anchor="middle" '
        f'font-family="monospace" font-size="13" '
        f'transform="rotate(-90 20 {CANVAS / 2:.2f})">{y_label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
