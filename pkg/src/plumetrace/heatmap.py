"""Minimal static SVG rendering of source-location heatmaps.

Deliberately small: a rectangle lattice over the source grid, a marker at the
argmax, and a discrete scale bar.  Colors come from a fixed 8-stop ramp
(viridis anchor colors) interpolated linearly in RGB; the stops are part of
the output contract and documented in the README.
"""

from __future__ import annotations

import math
from pathlib import Path

from .estimate import ReducedSurface

__all__ = ["COLOR_STOPS", "color_for", "render_heatmap_svg"]

# Fixed 8-stop ramp: (position in [0, 1], hex color).
COLOR_STOPS = (
    (0.0, "#440154"),
    (1.0 / 7.0, "#46327e"),
    (2.0 / 7.0, "#365c8d"),
    (3.0 / 7.0, "#277f8e"),
    (4.0 / 7.0, "#1fa187"),
    (5.0 / 7.0, "#4ac16d"),
    (6.0 / 7.0, "#a0da39"),
    (1.0, "#fde725"),
)

_MISSING = "#bbbbbb"


def _hex_to_rgb(h: str) -> tuple[int, int, int]:
    return int(h[1:3], 16), int(h[3:5], 16), int(h[5:7], 16)


def color_for(v: float) -> str:
    """Color of a normalized value in [0, 1] on the fixed ramp."""
    if math.isnan(v):
        return _MISSING
    v = min(1.0, max(0.0, v))
    for (p0, c0), (p1, c1) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
        if v <= p1:
            w = 0.0 if p1 == p0 else (v - p0) / (p1 - p0)
            r0, g0, b0 = _hex_to_rgb(c0)
            r1, g1, b1 = _hex_to_rgb(c1)
            return "#{:02x}{:02x}{:02x}".format(
                round(r0 + w * (r1 - r0)), round(g0 + w * (g1 - g0)), round(b0 + w * (b1 - b0))
            )
    return COLOR_STOPS[-1][1]


def render_heatmap_svg(reduced: ReducedSurface, path, cell_px: int = 24) -> None:
    """Write the reduced surface as a colored lattice with an argmax marker."""
    xs = sorted({x for x, _ in reduced.cells})
    ys = sorted({y for _, y in reduced.cells}, reverse=True)  # larger y drawn on top
    finite = [v for v in reduced.cells.values() if not math.isnan(v)]
    vmin = min(finite) if finite else 0.0
    vmax = max(finite) if finite else 1.0
    span = vmax - vmin

    def norm(v: float) -> float:
        if math.isnan(v):
            return float("nan")
        return 0.5 if span == 0 else (v - vmin) / span

    bar_w = 3 * cell_px
    width = len(xs) * cell_px + bar_w
    height = max(len(ys) * cell_px, 8 * cell_px // 2 + 2 * cell_px)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    ]
    col = {x: i for i, x in enumerate(xs)}
    row = {y: j for j, y in enumerate(ys)}
    for (x, y), v in reduced.cells.items():
        px = col[x] * cell_px
        py = row[y] * cell_px
        parts.append(
            f'<rect x="{px}" y="{py}" width="{cell_px}" height="{cell_px}" '
            f'fill="{color_for(norm(v))}"/>'
        )
    ax, ay = reduced.argmax
    cx = col[ax] * cell_px + cell_px / 2
    cy = row[ay] * cell_px + cell_px / 2
    parts.append(
        f'<circle cx="{cx}" cy="{cy}" r="{cell_px / 3:.1f}" fill="none" '
        f'stroke="#ffffff" stroke-width="2"/>'
    )
    # discrete scale bar: the 8 ramp stops from bottom (min) to top (max)
    bx = len(xs) * cell_px + cell_px // 2
    sh = cell_px // 2
    for i, (_, c) in enumerate(COLOR_STOPS):
        by = (len(COLOR_STOPS) - 1 - i) * sh + cell_px
        parts.append(f'<rect x="{bx}" y="{by}" width="{cell_px}" height="{sh}" fill="{c}"/>')
    font = max(8, cell_px // 3)
    top_y = cell_px
    bot_y = len(COLOR_STOPS) * sh + cell_px
    parts.append(
        f'<text x="{bx + cell_px + 4}" y="{top_y + font}" font-size="{font}" '
        f'font-family="monospace">{vmax:.4g}</text>'
    )
    parts.append(
        f'<text x="{bx + cell_px + 4}" y="{bot_y}" font-size="{font}" '
        f'font-family="monospace">{vmin:.4g}</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8", newline="\n")
