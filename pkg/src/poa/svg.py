"""Static SVG rendering of grids, paths and mission markers.

Output is self-contained: no scripts, stylesheets or external hrefs.
"""

from __future__ import annotations

from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .geometry import OCCUPIED, OccupancyGrid

PX_PER_M = 40.0
PATH_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(
    passable: OccupancyGrid,
    unpassable: OccupancyGrid,
    paths: Sequence[tuple[str, np.ndarray]] = (),
    markers: Iterable[tuple[str, float, float]] = (),
    splices: Iterable[tuple[float, float]] = (),
    title: str = "",
) -> str:
    """Grid cells (passable light, unpassable dark), path polylines, splice dots and labelled markers."""
    x0, y0, x1, y1 = unpassable.extent
    w, h = (x1 - x0) * PX_PER_M, (y1 - y0) * PX_PER_M
    res = unpassable.resolution * PX_PER_M

    def px(x, y):
        return (x - x0) * PX_PER_M, (y1 - y) * PX_PER_M

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
        f'viewBox="0 0 {w:.2f} {h:.2f}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{w:.2f}" height="{h:.2f}" fill="#ffffff" stroke="#000000"/>',
    ]
    for grid, fill in ((passable, "#c8e6c9"), (unpassable, "#424242")):
        rows, cols = np.nonzero(grid.cells == OCCUPIED)
        for r, c in zip(rows.tolist(), cols.tolist()):
            sx, sy = px(grid.origin_x + c * grid.resolution, grid.origin_y + (r + 1) * grid.resolution)
            out.append(f'<rect x="{sx:.2f}" y="{sy:.2f}" width="{res:.2f}" height="{res:.2f}" fill="{fill}"/>')
    for k, (name, xy) in enumerate(paths):
        if len(xy) == 0:
            continue
        pts = " ".join("{:.2f},{:.2f}".format(*px(x, y)) for x, y in np.asarray(xy)[:, :2].tolist())
        colour = PATH_COLOURS[k % len(PATH_COLOURS)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2">'
                   f"<title>{escape(name)}</title></polyline>")
    for x, y in splices:
        sx, sy = px(x, y)
        out.append(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="4" fill="#ff9800" stroke="#000000"/>')
    for label, x, y in markers:
        sx, sy = px(x, y)
        out.append(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="6" fill="#e53935"/>')
        out.append(f'<text x="{sx + 8:.2f}" y="{sy - 8:.2f}" font-size="14" '
                   f'font-family={quoteattr("sans-serif")}>{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
