"""Shared quadrature helpers: composite Gauss-Legendre rules and
polynomial extrapolation to zero."""

import numpy as np

_GL_CACHE = {}


def gauss_legendre(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def composite_nodes(edges, order=16):
    """Nodes and weights of a composite Gauss-Legendre rule on ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) / 2 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate(f, edges, order=16):
    """Integrate a vectorised ``f`` over the panels in ``edges``.

    ``f`` may return extra trailing axes: shape (n_nodes, ...).
    """
    nodes, weights = composite_nodes(edges, order)
    vals = np.asarray(f(nodes))
    return np.tensordot(weights, vals, axes=(0, 0))


def uniform_edges(a, b, max_width):
    n = max(1, int(np.ceil((b - a) / max_width)))
    return np.linspace(a, b, n + 1)


def merge_edges(*parts):
    e = np.unique(np.concatenate([np.atleast_1d(np.asarray(p, float)) for p in parts]))
    return e


def graded_edges(center, radius, smallest, ratio=2.0):
    """Panels around ``center`` shrinking geometrically down to ``smallest``."""
    widths = [radius]
    while widths[-1] / ratio > smallest:
        widths.append(widths[-1] / ratio)
    widths = np.array(widths)
    return np.concatenate([center - widths, [center], center + widths[::-1]])


def extrapolate_to_zero(h, values):
    """Neville extrapolation of values(h) to h = 0.

    Returns the table diagonal (successively higher-order estimates);
    the last entry uses every sample.
    """
    h = np.asarray(h, dtype=float)
    vals = [np.asarray(v, dtype=complex) for v in values]
    n = len(h)
    table = [vals[:]]
    for level in range(1, n):
        prev = table[-1]
        row = []
        for i in range(n - level):
            hi, hj = h[i], h[i + level]
            row.append((hj * prev[i] - hi * prev[i + 1]) / (hj - hi))
        table.append(row)
    return [table[level][0] for level in range(n)]
