"""Deterministic SVG rendering of sweep grids and ray paths."""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyData


def _f(v):
    return f"{v:.6g}"


def _header(x0, y0, w, h, pixels=600):
    scale = pixels / max(w, h)
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w * scale)}" height="{_f(h * scale)}" '
        f'viewBox="{_f(x0)} {_f(y0)} {_f(w)} {_f(h)}">',
    ]


def grid_svg(values, x_edges, y_edges, vmin=None, vmax=None, title=""):
    """Cells values[i][j] over [x_edges[i], x_edges[i+1]] x [y_edges[j], y_edges[j+1]].

    Gray level is linear in the value between vmin (black) and vmax
    (white); NaN cells stay unfilled.
    """
    vals = np.asarray(values, float)
    if vals.size == 0:
        raise EmptyData("empty grid")
    finite = vals[np.isfinite(vals)]
    lo = float(finite.min()) if vmin is None and finite.size else (vmin if vmin is not None else 0.0)
    hi = float(finite.max()) if vmax is None and finite.size else (vmax if vmax is not None else 1.0)
    span = hi - lo if hi > lo else 1.0
    xe, ye = np.asarray(x_edges, float), np.asarray(y_edges, float)
    x0, x1, y0, y1 = xe[0], xe[-1], ye[0], ye[-1]
    out = _header(x0, -y1, x1 - x0, y1 - y0)
    if title:
        out.append(f"<title>{title}</title>")
    out.append('<g transform="scale(1,-1)" shape-rendering="crispEdges">')
    for i in range(vals.shape[0]):
        for j in range(vals.shape[1]):
            v = vals[i, j]
            if not math.isfinite(v):
                continue
            g = int(round(255 * min(max((v - lo) / span, 0.0), 1.0)))
            out.append(
                f'<rect x="{_f(xe[i])}" y="{_f(ye[j])}" width="{_f(xe[i + 1] - xe[i])}" '
                f'height="{_f(ye[j + 1] - ye[j])}" fill="rgb({g},{g},{g})"/>'
            )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_svg(grid):
    """Lyapunov exponents of a bifurcation sweep, alpha horizontal, phi vertical."""
    if not grid or not grid[0]:
        raise EmptyData("empty sweep")
    alphas = np.array([row[0].alpha for row in grid])
    phis = np.array([c.phi for c in grid[0]])
    vals = [[c.lyapunov for c in row] for row in grid]
    return grid_svg(vals, _edges(alphas), _edges(phis), title="lyapunov exponent")


def _edges(centers):
    c = np.asarray(centers, float)
    if c.size == 1:
        return np.array([c[0] - 0.5, c[0] + 0.5]) if c[0] == 0 else np.array([c[0] * 0.95, c[0] * 1.05])
    mid = 0.5 * (c[1:] + c[:-1])
    return np.concatenate([[c[0] - (mid[0] - c[0])], mid, [c[-1] + (c[-1] - mid[-1])]])


def attractor_fraction(points, tail=0.1):
    """Extent of the last ``tail`` of the vertices relative to the earlier ones."""
    pts = np.asarray(points, float)
    m = max(2, int(math.ceil(tail * len(pts))))
    head, last = pts[:-m], pts[-m:]
    if len(head) == 0:
        return 1.0
    size = lambda p: float(np.max(np.ptp(p, axis=0)))
    return size(last) / max(size(head), 1e-300)


def path_svg(points, vertices, tail=0.1):
    """Domain outline, the ray as a polyline, and its final ``tail`` highlighted."""
    pts = np.asarray(points, float)
    if pts.size == 0:
        raise EmptyData("empty path")
    verts = np.asarray(vertices, float)
    x0, x1 = verts[:, 0].min(), verts[:, 0].max()
    y0, y1 = verts[:, 1].min(), verts[:, 1].max()
    out = _header(x0, -y1, x1 - x0, y1 - y0)
    out.append('<g transform="scale(1,-1)" fill="none" stroke-linejoin="round">')
    outline = " ".join(f"{_f(x)},{_f(y)}" for x, y in verts)
    out.append(f'<polygon points="{outline}" stroke="black" stroke-width="0.01"/>')
    line = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
    out.append(f'<polyline class="ray" points="{line}" stroke="gray" stroke-width="0.004"/>')
    m = max(2, int(math.ceil(tail * len(pts))))
    if len(pts) > m:
        last = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts[-m:])
        out.append(f'<polyline class="attractor" points="{last}" stroke="crimson" stroke-width="0.012"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(data, **style):
    """Dispatch on the data: a sweep grid, a RayPath, or a 2D array."""
    from .raydyn import RayPath

    if isinstance(data, RayPath):
        vertices = style.pop("vertices")
        return path_svg(data.points(), vertices, **style)
    if isinstance(data, list) and data and isinstance(data[0], list) and hasattr(data[0][0], "lyapunov"):
        return sweep_svg(data)
    vals = np.asarray(data, float)
    if vals.ndim != 2:
        raise EmptyData("expected a 2D grid")
    x_edges = style.get("x_edges", np.arange(vals.shape[0] + 1))
    y_edges = style.get("y_edges", np.arange(vals.shape[1] + 1))
    return grid_svg(vals, x_edges, y_edges, style.get("vmin"), style.get("vmax"))
