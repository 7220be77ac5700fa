"""Hand-written SVG of a planar realization, its complex and an exploration trace."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .complex import Complex
from .exploration import ExplorationTrace
from .graphs import up_graph

BLUE = "#1f5fbf"
GREY = "#8a8a8a"
ORIGIN = "#c0392b"
REVEALED = "#f3e3b5"


def _f(v: float) -> str:
    return f"{v:.3f}"


def sphere_components(cx: Complex, q: int, s: float) -> np.ndarray:
    """Mask over F_q of the complex without the origin: components holding a
    vertex with norm <= s and one with norm > s."""
    c = cx.without_origin()
    rows = c.faces(q)
    if len(rows) == 0:
        return np.zeros(0, dtype=bool)
    lab = up_graph(c, q).labels if q < c.alpha else np.arange(len(rows))
    norms = np.linalg.norm(c.vertices.positions, axis=1)
    inside = (norms[rows] <= s).any(axis=1)
    outside = (norms[rows] > s).any(axis=1)
    k = int(lab.max()) + 1
    has_in = np.bincount(lab, weights=inside, minlength=k) > 0
    has_out = np.bincount(lab, weights=outside, minlength=k) > 0
    return (has_in & has_out)[lab]


def render_svg(cx: Complex, r: float, s: float, q: int = 0, trace: ExplorationTrace | None = None,
               px_per_unit: float = 40.0, title: str | None = None) -> str:
    """Points, edges, filled triangles, cube grid, the circles of radius s and r,
    revealed cubes shaded, and sphere-touching components in blue."""
    v = cx.vertices
    grid = v.window.grid
    if grid.d != 2:
        raise ValueError("rendering needs d = 2")
    corners = v.window.lower_corners()
    if len(corners):
        lo = corners.min(axis=0)
        hi = corners.max(axis=0) + grid.side
    else:
        lo, hi = np.array([-r, -r]), np.array([r, r])
    pad = 0.5
    x0, y0 = lo[0] - pad, lo[1] - pad
    w, h = hi[0] - lo[0] + 2 * pad, hi[1] - lo[1] + 2 * pad
    sc = px_per_unit

    def X(x: float) -> str:
        return _f((x - x0) * sc)

    def Y(y: float) -> str:
        return _f((y0 + h - y) * sc)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w * sc)}" height="{_f(h * sc)}" '
        f'viewBox="0 0 {_f(w * sc)} {_f(h * sc)}">',
        f'<rect x="0" y="0" width="{_f(w * sc)}" height="{_f(h * sc)}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")

    revealed = trace.revealed_set if trace is not None else frozenset()
    out.append('<g id="cubes" stroke="#dddddd" stroke-width="0.5">')
    for i, c in zip(v.window.indices, corners):
        fill = REVEALED if i in revealed else "none"
        out.append(f'<rect x="{X(c[0])}" y="{Y(c[1] + grid.side)}" width="{_f(grid.side * sc)}" '
                   f'height="{_f(grid.side * sc)}" fill="{fill}"/>')
    out.append("</g>")

    for rad, dash in ((s, "6 4"), (r, "none")):
        out.append(f'<circle cx="{X(0.0)}" cy="{Y(0.0)}" r="{_f(rad * sc)}" fill="none" stroke="#333333" '
                   f'stroke-width="1" stroke-dasharray="{dash}"/>')

    # colour by sphere-touching components of the complex without the origin
    plain = cx.without_origin()
    blue_vertices = np.zeros(plain.n, dtype=bool)
    if plain.n:
        mask = sphere_components(cx, q, s)
        rows = plain.faces(q)
        if len(rows):
            blue_vertices[np.unique(rows[mask])] = True
    keep = np.ones(cx.n, dtype=bool)
    if v.has_origin:
        keep[v.origin] = False
    blue = np.zeros(cx.n, dtype=bool)
    blue[np.nonzero(keep)[0]] = blue_vertices
    P = v.positions

    if cx.alpha >= 2:
        out.append('<g id="triangles" stroke="none">')
        for a, b, c in cx.faces(2).tolist():
            col = BLUE if blue[a] and blue[b] and blue[c] else GREY
            pts = " ".join(f"{X(P[k, 0])},{Y(P[k, 1])}" for k in (a, b, c))
            out.append(f'<polygon points="{pts}" fill="{col}" fill-opacity="0.25"/>')
        out.append("</g>")

    out.append('<g id="edges" stroke-width="1">')
    for a, b in cx.faces(1).tolist():
        col = BLUE if blue[a] and blue[b] else GREY
        if v.has_origin and v.origin in (a, b):
            col = ORIGIN
        out.append(f'<line x1="{X(P[a, 0])}" y1="{Y(P[a, 1])}" x2="{X(P[b, 0])}" y2="{Y(P[b, 1])}" stroke="{col}"/>')
    out.append("</g>")

    out.append('<g id="points">')
    for k in range(cx.n):
        if k == v.origin:
            continue
        col = BLUE if blue[k] else GREY
        out.append(f'<circle cx="{X(P[k, 0])}" cy="{Y(P[k, 1])}" r="2" fill="{col}"/>')
    if v.has_origin:
        out.append(f'<circle cx="{X(0.0)}" cy="{Y(0.0)}" r="3.5" fill="{ORIGIN}"/>')
    out.append("</g>")
    if trace is not None:
        verdict = "B_r occurred" if trace.decision else "B_r did not occur"
        out.append(f'<text x="8" y="18" font-family="sans-serif" font-size="13" fill="#333333">'
                   f'{escape(verdict)}; revealed {len(trace.revealed)} of {len(v.window)} cubes</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
