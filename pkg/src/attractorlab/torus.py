"""Forced evolution on the d-torus for lattice symbols homogeneous of
degree 0, kernel projections, and Diophantine statistics over lattice
balls."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateResonance, DomainError, EmptyData

ZERO_TOL = 1e-14
MAX_DIM = 3


class LatticeSymbol:
    """h(n) = func(n/|n|) on Z^d minus the origin.

    ``func`` acts on arrays of unit vectors with trailing axis d.
    """

    def __init__(self, func, d, name="", grad=None):
        if d not in range(1, MAX_DIM + 1):
            raise DomainError(f"dimension must be 1..{MAX_DIM}")
        self.func = func
        self.d = d
        self.name = name
        self._grad = grad
        rng = np.random.default_rng(0)
        test = rng.integers(-20, 21, size=(64, d))
        test = test[np.any(test != 0, axis=1)]
        if not np.allclose(self(test), self(2 * test), rtol=0, atol=1e-13):
            raise DomainError("symbol is not homogeneous of degree 0 on the lattice")

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        r = np.linalg.norm(n, axis=-1, keepdims=True)
        if np.any(r == 0):
            raise DomainError("lattice symbol undefined at n = 0")
        return np.asarray(self.func(n / r), float)

    def gradient(self, x):
        """Gradient of the degree-0 extension at a point x of R^d."""
        x = np.asarray(x, float)
        if self._grad is not None:
            return np.asarray(self._grad(x), float)
        g = np.empty(self.d)
        for i in range(self.d):
            h = 1e-6 * max(1.0, np.linalg.norm(x))
            e = np.zeros(self.d)
            e[i] = h
            g[i] = (self(x + e) - self(x - e)) / (2 * h)
        return g

    @classmethod
    def first_coordinate(cls, d=2):
        """h(n) = n_1/|n|; exactly zero on n_1 = 0."""
        def grad(x):
            r = np.linalg.norm(x)
            return (np.eye(d)[0] - x[0] * x / r**2) / r

        return cls(lambda u: u[..., 0], d, "n1/|n|", grad)

    @classmethod
    def direction(cls, Y):
        """h(n) = Y.n/|n|."""
        Y = np.asarray(Y, float)

        def grad(x):
            r = np.linalg.norm(x)
            return (Y - (Y @ x) * x / r**2) / r

        return cls(lambda u: u @ Y, len(Y), f"Y.n/|n|, Y={Y.tolist()}", grad)


class ModeSet:
    """Finitely supported Fourier coefficients n -> a_n with a_0 = 0."""

    def __init__(self, coeffs: dict, d=None):
        items = {tuple(int(v) for v in k): complex(a) for k, a in coeffs.items()}
        if items:
            dims = {len(k) for k in items}
            if len(dims) != 1:
                raise DomainError("mixed lattice dimensions")
            d = dims.pop()
        if d is None:
            raise DomainError("dimension of an empty mode set must be given")
        zero = (0,) * d
        if items.get(zero, 0) != 0:
            raise DomainError("the zero mode must vanish")
        items.pop(zero, None)
        self.d = d
        self.coeffs = items

    def indices(self):
        return np.array(sorted(self.coeffs), dtype=int).reshape(-1, self.d)

    def values(self):
        return np.array([self.coeffs[k] for k in sorted(self.coeffs)], dtype=complex)

    @classmethod
    def from_arrays(cls, idx, vals, d=None):
        return cls({tuple(k): v for k, v in zip(np.asarray(idx), vals)}, d=d if d else np.shape(idx)[-1])

    def norm2(self):
        return float(np.sum(np.abs(self.values()) ** 2))

    def sobolev(self, s):
        idx = self.indices()
        if len(idx) == 0:
            return 0.0
        return float(np.sum(np.abs(self.values()) ** 2 * np.linalg.norm(idx, axis=1) ** (2 * s)))

    def inner(self, other):
        return complex(sum(a * np.conj(other.coeffs.get(k, 0)) for k, a in self.coeffs.items()))

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, a in other.coeffs.items():
            out[k] = out.get(k, 0) + a
        return ModeSet(out, self.d)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        return ModeSet({k: c * a for k, a in self.coeffs.items()}, self.d)

    def __getitem__(self, n):
        return self.coeffs.get(tuple(n), 0j)


def evolve_forced(h: LatticeSymbol, f: ModeSet, t):
    """Mode-wise solution of u' = i(f - H u), u(0) = 0: a_n (1 - exp(-i t h))/h, or i t a_n."""
    idx, a = f.indices(), f.values()
    if len(idx) == 0:
        return ModeSet({}, f.d)
    hv = h(idx)
    res = np.abs(hv) <= ZERO_TOL
    hs = np.where(res, 1.0, hv)
    u = np.where(res, 1j * t * a, a * (1 - np.exp(-1j * t * hv)) / hs)
    return ModeSet.from_arrays(idx, u, f.d)


def evolve_rk4(h: LatticeSymbol, f: ModeSet, t, dt=1e-3):
    """Reference integration of u' = i(a - h u), u(0) = 0."""
    idx, a = f.indices(), f.values()
    hv = np.where(np.abs(h(idx)) <= ZERO_TOL, 0.0, h(idx)) if len(idx) else np.zeros(0)
    n = max(1, int(math.ceil(t / dt)))
    k = t / n
    u = np.zeros(len(a), complex)

    def rhs(u):
        return 1j * (a - hv * u)

    for _ in range(n):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * k * k1)
        k3 = rhs(u + 0.5 * k * k2)
        k4 = rhs(u + k * k3)
        u = u + k / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return ModeSet.from_arrays(idx, u, f.d)


def kernel_projection(h: LatticeSymbol, f: ModeSet):
    idx, a = f.indices(), f.values()
    if len(idx) == 0:
        return ModeSet({}, f.d)
    keep = np.abs(h(idx)) <= ZERO_TOL
    return ModeSet.from_arrays(idx[keep], a[keep], f.d)


def norm_series_csv(h, f, times):
    if len(times) == 0:
        raise EmptyData("no times")
    f0 = kernel_projection(h, f)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "norm_u", "norm_u_minus_itf0"])
    for t in times:
        u = evolve_forced(h, f, t)
        w.writerow([f"{t:.12g}", f"{math.sqrt(u.norm2()):.12g}",
                    f"{math.sqrt((u - f0.scale(1j * t)).norm2()):.12g}"])
    return buf.getvalue()


# --- lattice scans -----------------------------------------------------------


def _ball(N, d, chunk_rows=64):
    """Nonzero n with |n| <= N, in lexicographic order, in chunks."""
    N = int(N)
    if d == 1:
        n = np.arange(-N, N + 1)
        yield n[n != 0][:, None]
        return
    for start in range(-N, N + 1, chunk_rows):
        first = np.arange(start, min(start + chunk_rows, N + 1))
        rest = np.arange(-N, N + 1)
        grids = np.meshgrid(first, *([rest] * (d - 1)), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        r2 = np.sum(pts.astype(np.int64) ** 2, axis=1)
        keep = (r2 <= N * N) & (r2 > 0)
        if np.any(keep):
            yield pts[keep]


def _weighted_minima(values, radii, grid, N):
    """Minima of |v| |n|^e over |n| <= N and over the full chunk, for each exponent e."""
    logv = np.log(np.abs(values), where=values != 0, out=np.full(values.shape, -np.inf))
    logr = np.log(radii)
    inner = radii <= N
    w = logv[None, :] + np.asarray(grid)[:, None] * logr[None, :]
    full = w.min(axis=1)
    half = np.where(inner[None, :], w, np.inf).min(axis=1) if np.any(inner) else np.full(len(grid), np.inf)
    return half, full


def _stable_exponent(grid, at_N, at_2N, rel=0.1):
    for e, a, b in zip(grid, at_N, at_2N):
        if a > 0 and b > 0 and abs(b - a) < rel * a:
            return float(e)
    return None


@dataclass
class DiophantineStats:
    n_max: int
    alpha_grid: list
    h_min: list
    h_min_2N: list
    beta_grid: list
    Y_min: list
    Y_min_2N: list
    alpha_star: float | None
    beta_star: float | None

    def to_json(self):
        return json.dumps(self.__dict__, indent=2)


def diophantine_stats(h, Y, N, alpha_grid=None, beta_grid=None):
    """min |h(n)| |n|^alpha and min |Y.n| |n|^beta over 0 < |n| <= N (and 2N)."""
    if N < 1:
        raise DomainError("N must be at least 1")
    Y = np.asarray(Y, float)
    d = len(Y)
    if h is not None and h.d != d:
        raise DomainError("symbol and frequency vector dimensions differ")
    if d > MAX_DIM:
        raise DomainError(f"dimension capped at {MAX_DIM}")
    alpha_grid = np.arange(0, 3.01, 0.25) if alpha_grid is None else np.asarray(alpha_grid, float)
    beta_grid = np.arange(0, 3.01, 0.25) if beta_grid is None else np.asarray(beta_grid, float)
    hN = np.full(len(alpha_grid), np.inf)
    h2N = hN.copy()
    yN = np.full(len(beta_grid), np.inf)
    y2N = yN.copy()
    for pts in _ball(2 * N, d):
        r = np.linalg.norm(pts, axis=1)
        a, b = _weighted_minima(pts @ Y, r, beta_grid, N)
        yN, y2N = np.minimum(yN, a), np.minimum(y2N, b)
        if h is not None:
            a, b = _weighted_minima(h(pts), r, alpha_grid, N)
            hN, h2N = np.minimum(hN, a), np.minimum(h2N, b)
    ex = np.exp
    h_min, h_min_2N = ex(hN).tolist(), ex(h2N).tolist()
    Y_min, Y_min_2N = ex(yN).tolist(), ex(y2N).tolist()
    return DiophantineStats(
        int(N), alpha_grid.tolist(), h_min if h is not None else [], h_min_2N if h is not None else [],
        beta_grid.tolist(), Y_min, Y_min_2N,
        _stable_exponent(alpha_grid, h_min, h_min_2N) if h is not None else None,
        _stable_exponent(beta_grid, Y_min, Y_min_2N),
    )


@dataclass
class SmallDenominatorReport:
    N: int
    bound_constant: float
    empirical_constant: float
    violations: list
    n_checked: int

    @property
    def ok(self):
        return not self.violations

    def to_json(self):
        return json.dumps(self.__dict__, indent=2)


def small_denominator_bound(h: LatticeSymbol, n0, N, max_violations=100):
    """Check |h(n)| >= (1/2) |h'(n0)| |n0| / |n| whenever h(n) != 0."""
    n0 = np.asarray(n0, float)
    if abs(float(h(n0))) > ZERO_TOL:
        raise DomainError("n0 is not a resonant lattice point")
    gnorm = float(np.linalg.norm(h.gradient(n0)))
    if gnorm < 1e-12:
        raise DegenerateResonance("gradient of h vanishes at n0")
    c = gnorm * float(np.linalg.norm(n0))
    bound = 0.5 * c
    emp = np.inf
    violations = []
    count = 0
    for pts in _ball(N, h.d):
        hv = np.abs(h(pts))
        nz = hv > ZERO_TOL
        pts, hv = pts[nz], hv[nz]
        count += len(hv)
        q = hv * np.linalg.norm(pts, axis=1)
        if len(q):
            emp = min(emp, float(q.min()) / c)
        bad = np.nonzero(q < bound)[0]
        for i in bad[: max(0, max_violations - len(violations))]:
            violations.append(pts[i].tolist())
    return SmallDenominatorReport(int(N), 0.5, emp, violations, count)
