"""Quasi-resonant forcing of the free Schroedinger evolution, boundary
values (s - i0)^-1, and the limit/oscillating/decaying split of
I(t) = <(1 - exp(-its))/s, nu>.

Time-dependent kernels are written through
(1 - exp(-i t x))/x = i t exp(-i t x/2) sinc(t x / 2 pi),
which is regular at x = 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sint
from scipy import optimize

from ._quad import composite_nodes, merge_edges, uniform_edges
from .errors import (
    AtomTooClose,
    DegenerateLevel,
    DomainError,
    EmptyData,
    HolderViolation,
    QuadratureFailure,
)


def _kernel(t, x):
    """(1 - exp(-i t x))/x."""
    return 1j * t * np.exp(-0.5j * t * x) * np.sinc(t * x / (2 * np.pi))


class ForcingProfile:
    """Fourier data fhat(xi) of a forcing, truncated to |xi| <= xi_max."""

    def __init__(self, fhat, xi_max=8.0, n_points=4001, decay_constant=None):
        self.fhat = fhat
        self.xi_max = float(xi_max)
        self.n_points = int(n_points)
        grid = np.linspace(-xi_max, xi_max, self.n_points)
        vals = np.abs(np.asarray(fhat(grid)))
        if not np.all(np.isfinite(vals)):
            raise DomainError("forcing profile is not finite on the grid")
        C = decay_constant if decay_constant is not None else 100 * max(float(vals.max()), 1e-300)
        if np.any(vals > C * (1 + np.abs(grid)) ** -4 * (1 + 1e-12)):
            raise DomainError("forcing profile does not decay like (1+|xi|)^-4")
        self.decay_constant = C

    def __call__(self, xi):
        return np.asarray(self.fhat(np.asarray(xi, float)))

    def scaled(self, c):
        return ForcingProfile(lambda xi: c * self.fhat(xi), self.xi_max, self.n_points,
                              abs(c) * self.decay_constant)

    @classmethod
    def gaussian(cls, xi_max=8.0):
        return cls(lambda xi: np.exp(-np.asarray(xi, float) ** 2), xi_max)


def schrodinger_forced_spectrum(f, omega0, t, xi):
    """psi_hat(t, xi) for i d_t psi = -psi_xx + f exp(-i omega0 t), psi(0) = 0."""
    if not omega0 > 0:
        raise DomainError("omega0 must be positive")
    if t < 0:
        raise DomainError("t must be nonnegative")
    xi = np.asarray(xi, float)
    x = xi**2 - omega0
    # (exp(itx) - 1)/x = -conj of the kernel with the same t
    quotient = -np.conj(_kernel(t, x))
    return -1j * f(xi) * np.exp(-1j * t * xi**2) * quotient


def _xi_edges(xi_max, omega0, t, band_nodes=32, order=16, max_nodes=4_000_000):
    # oscillation length ~ 2pi/(2 t |xi|); band |xi^2 - w| <= 2pi/t
    osc = 2 * np.pi / max(2 * t * xi_max, 1e-12)
    width = min(0.1, osc / 2)
    root = math.sqrt(omega0)
    band = np.pi / (max(t, 1e-12) * root)
    band_width = min(width, 2 * band * order / band_nodes)
    parts = [uniform_edges(-xi_max, xi_max, width)]
    for c in (-root, root):
        lo, hi = max(-xi_max, c - 2 * band), min(xi_max, c + 2 * band)
        if lo < hi:
            parts.append(uniform_edges(lo, hi, band_width))
    edges = merge_edges(*parts)
    if (len(edges) - 1) * order > max_nodes:
        raise QuadratureFailure("quasi-resonant band cannot be resolved within the node budget")
    nodes, _ = composite_nodes(edges, order)
    inside = np.count_nonzero(np.abs(nodes**2 - omega0) <= 2 * np.pi / max(t, 1e-12))
    if root <= xi_max and inside < band_nodes:
        raise QuadratureFailure(f"only {inside} nodes inside the quasi-resonant band")
    return edges


def _xi_integral(g, f, omega0, t, order=16):
    edges = _xi_edges(f.xi_max, omega0, t, order=order)
    nodes, weights = composite_nodes(edges, order)
    return np.sum(weights * g(nodes))


def _boundary_density(f, phi_hat):
    """F(z) = (f phi*(sqrt z) + f phi*(-sqrt z)) / (2 sqrt z), zero for z <= 0."""
    def F(z):
        z = np.asarray(z, float)
        r = np.sqrt(np.where(z > 0, z, 1.0))
        val = (f(r) * np.conj(phi_hat(r)) + f(-r) * np.conj(phi_hat(-r))) / (2 * r)
        return np.where(z > 0, val, 0.0)

    return F


@dataclass(frozen=True)
class AmplitudeResult:
    value: complex
    limit: complex
    t: float

    @property
    def error(self):
        return abs(self.value - self.limit)


def amplitude_limit(f, phi_hat, omega0):
    """-i p.v. int F(z)/(z - omega0) dz + pi F(omega0)."""
    F = _boundary_density(f, phi_hat)
    boundary = sokhotski_plemelj(F, omega0, support=(0.0, f.xi_max**2), singular_points=(0.0,))
    return -1j * boundary


def amplitude_observable(f, phi_hat, omega0, t):
    """2 pi exp(i omega0 t) <psi(t), phi> and its t -> infinity limit."""
    if not omega0 > 0:
        raise DomainError("omega0 must be positive")

    def g(xi):
        # exp(i w t) psi_hat conj(phi_hat), with psi_hat from the closed form
        return -1j * f(xi) * np.conj(phi_hat(xi)) * _kernel(t, xi**2 - omega0)

    value = complex(_xi_integral(g, f, omega0, t))
    return AmplitudeResult(value, complex(amplitude_limit(f, phi_hat, omega0)), t)


def energy_density_at(f, z):
    """G(z) = (|f(sqrt z)|^2 + |f(-sqrt z)|^2) sqrt z."""
    r = math.sqrt(z)
    return float((abs(f(r)) ** 2 + abs(f(-r)) ** 2) * r)


def energy_slope_prediction(f, omega0):
    """Asymptotic d/dt of the energy: pi * G(omega0).

    With mu = t(z - omega0), E(t) = int G(z)(1 - cos mu)/(z - omega0)^2 dz and
    int (1 - cos mu)/mu^2 dmu = pi.
    """
    return math.pi * energy_density_at(f, omega0)


def energy_observable(f, omega0, t):
    """int |xi|^2 |psi_hat(t, xi)|^2 dxi."""
    if not omega0 > 0:
        raise DomainError("omega0 must be positive")
    if t == 0:
        return 0.0

    def g(xi):
        x = xi**2 - omega0
        return xi**2 * np.abs(f(xi)) ** 2 * (t * np.sinc(t * x / (2 * np.pi))) ** 2

    return float(np.real(_xi_integral(g, f, omega0, t)))


@dataclass
class EnergyFit:
    times: np.ndarray
    energies: np.ndarray
    slope: float
    intercept: float
    predicted_slope: float

    @property
    def relative_residual(self):
        fit = self.intercept + self.slope * self.times
        span = abs(self.slope) * (self.times.max() - self.times.min())
        return float(np.max(np.abs(self.energies - fit)) / span)

    def to_json(self):
        return json.dumps({"fitted_slope": self.slope, "intercept": self.intercept,
                           "predicted_slope": self.predicted_slope,
                           "relative_residual": self.relative_residual}, indent=2)


def energy_fit(f, omega0, times):
    times = np.asarray(times, float)
    if times.size < 2:
        raise EmptyData("need at least two times for a slope")
    E = np.array([energy_observable(f, omega0, t) for t in times])
    slope, intercept = np.polyfit(times, E, 1)
    return EnergyFit(times, E, float(slope), float(intercept), energy_slope_prediction(f, omega0))


# --- boundary values ---------------------------------------------------------


def _holder_check(m, omega0, r, scale):
    radii = r * 2.0 ** -np.arange(0, 24, 3)
    d = np.array([np.max(np.abs(np.asarray(m(omega0 + q)) - np.asarray(m(omega0 - q)))) for q in radii])
    if d[-1] > 1e-6 * scale and d[-1] > 0.5 * d[0]:
        raise HolderViolation(f"density jumps at {omega0}: |m(w+r) - m(w-r)| -> {d[-1]:.3g}")


def _quad(func, a, b, points=()):
    pts = [p for p in points if a < p < b]
    val, err = sint.quad_vec(func, a, b, epsabs=1e-13, epsrel=1e-11, points=pts or None, limit=4000)
    if not np.all(np.isfinite(val)):
        raise QuadratureFailure("non-finite quadrature value")
    return np.asarray(val), float(np.max(err))


def sokhotski_plemelj(m, omega0=0.0, support=(-np.inf, np.inf), r=None, singular_points=(),
                      return_error=False):
    """<(z - omega0 - i0)^-1, m> = p.v. int m(z)/(z - omega0) dz + i pi m(omega0).

    Symmetric excision of radius r, Richardson-extrapolated over r, r/2, r/4
    in the odd powers r and r^3 of the excised piece.
    ``m`` may be complex and vector valued; it is taken to vanish outside
    ``support``.
    """
    lo, hi = support
    if not lo < omega0 < hi:
        val = _outside_support(m, omega0, lo, hi, singular_points)
        return (val, 0.0) if return_error else val

    def mm(z):
        z = np.asarray(z, float)
        inside = (z >= lo) & (z <= hi)
        v = np.asarray(m(np.where(inside, z, omega0)))
        mask = inside.reshape(inside.shape + (1,) * (v.ndim - inside.ndim))
        return np.where(mask, v, 0)

    # scale of the excision: distance to the nearest edge or known singularity
    near = [abs(v - omega0) for v in (lo, hi, *singular_points) if np.isfinite(v) and v != omega0]
    r = r if r is not None else 1e-2 * (min(near) if near else 1.0)
    m0 = np.asarray(m(omega0))
    _holder_check(mm, omega0, r, max(1.0, float(np.max(np.abs(m0)))))

    S = max(omega0 - lo, hi - omega0)
    s_pts = sorted({abs(p - omega0) for p in list(singular_points) + [lo, hi] if np.isfinite(p)})

    def odd(s):
        return (mm(omega0 + s) - mm(omega0 - s)) / s

    S_fin = S if np.isfinite(S) else max([1.0] + s_pts) * 2
    base, err = _quad(odd, r, S_fin, s_pts)
    if not np.isfinite(S):
        tail, e2 = _quad(odd, S_fin, np.inf)
        base, err = base + tail, err + e2
    # pieces [r/2, r] and [r/4, r/2]
    p1, e1 = _quad(odd, r / 2, r)
    p2, e2 = _quad(odd, r / 4, r / 2)
    v0, v1, v2 = base, base + p1, base + p1 + p2
    # the excised piece is even-integrand: c1 r + c3 r^3 + ..., so kill r then r^3
    a1, a2 = 2 * v1 - v0, 2 * v2 - v1
    pv = (8 * a2 - a1) / 7
    value = pv + 1j * np.pi * m0
    value = value[()] if np.ndim(value) == 0 else value
    if return_error:
        return value, float(np.max(np.abs(pv - a2))) + err + e1 + e2
    return value


def _outside_support(m, omega0, lo, hi, singular_points):
    # no boundary term: the integrand is regular on the support
    if omega0 in (lo, hi):
        raise HolderViolation("omega0 on the edge of the support")
    val, _ = _quad(lambda z: np.asarray(m(z)) / (z - omega0), lo, hi, singular_points)
    return val[()] if val.ndim == 0 else val


# --- oscillating integrals ---------------------------------------------------


@dataclass
class SpectralMeasure:
    """nu = m(s) ds on ``support`` plus atoms (s_j, w_j) with |s_j| >= gap."""

    density: object = None
    support: tuple = (-1.0, 1.0)
    atoms: list = field(default_factory=list)
    gap: float = 0.0
    breakpoints: tuple = ()

    def __post_init__(self):
        for s, _ in self.atoms:
            if s == 0 or abs(s) < self.gap:
                raise AtomTooClose(f"atom at {s} is inside the gap {self.gap}")
        if self.density is not None:
            m0 = np.asarray(self.density(0.0)) if self.support[0] < 0 < self.support[1] else 0
            if not np.all(np.isfinite(m0)):
                raise HolderViolation("density must be finite at 0")

    def m(self, s):
        s = np.asarray(s, float)
        if self.density is None:
            return np.zeros(s.shape)
        lo, hi = self.support
        inside = (s >= lo) & (s <= hi)
        v = np.asarray(self.density(np.where(inside, s, 0.0)))
        mask = inside.reshape(inside.shape + (1,) * (v.ndim - inside.ndim))
        return np.where(mask, v, 0)

    def default_radius(self):
        extent = max(abs(self.support[0]), abs(self.support[1]))
        if self.atoms:
            return min(0.5 * min(abs(s) for s, _ in self.atoms), extent)
        return extent

    def _edges(self, t, lo, hi):
        width = min(0.05 * (hi - lo), 1.0 / max(t, 1e-12))
        return merge_edges(uniform_edges(lo, hi, width),
                           [b for b in self.breakpoints if lo < b < hi])

    def integrate_ac(self, g, t, lo=None, hi=None, order=16):
        """int g(s) m(s) ds over [lo, hi] with panels resolving exp(-its)."""
        lo = self.support[0] if lo is None else lo
        hi = self.support[1] if hi is None else hi
        if self.density is None or hi <= lo:
            return 0.0
        nodes, w = composite_nodes(self._edges(t, lo, hi), order)
        gv = g(nodes)
        mv = self.m(nodes)
        gv = gv.reshape(gv.shape + (1,) * (mv.ndim - 1))
        return np.tensordot(w, gv * mv, axes=(0, 0))


@dataclass
class DecompositionResult:
    times: np.ndarray
    I: np.ndarray
    I_inf: complex
    b: np.ndarray
    eps: np.ndarray
    radius: float

    def consistency(self):
        return np.max(np.abs(self.I - (self.I_inf + self.b + self.eps)))

    def to_csv(self, energy=None):
        if len(self.times) == 0:
            raise EmptyData("no time samples")
        first = (lambda a: a) if np.ndim(self.I) == 1 else (lambda a: a[:, 0])
        I, b = first(self.I), first(self.b)
        eps = np.abs(self.eps) if np.ndim(self.eps) == 1 else np.linalg.norm(self.eps, axis=1)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "Re(I)", "Im(I)", "Re(b)", "Im(b)", "abs(eps)", "energy"])
        for i, t in enumerate(self.times):
            e = "" if energy is None else f"{energy[i]:.12g}"
            w.writerow([f"{t:.12g}", f"{I[i].real:.12g}", f"{I[i].imag:.12g}",
                        f"{b[i].real:.12g}", f"{b[i].imag:.12g}", f"{eps[i]:.12g}", e])
        return buf.getvalue()


def decompose_oscillating_integral(nu: SpectralMeasure, times, a=None):
    """I(t) = I_inf + b(t) + eps(t) with the cut of the ac part at |s| = a."""
    times = np.asarray(times, float)
    a = nu.default_radius() if a is None else float(a)
    for s, _ in nu.atoms:
        if abs(s) <= a:
            raise AtomTooClose(f"atom at {s} lies inside the excision window |s| <= {a}")
    lo, hi = nu.support

    if nu.density is not None and lo < 0 < hi:
        I_inf = sokhotski_plemelj(nu.m, 0.0, support=nu.support, singular_points=nu.breakpoints)
    elif nu.density is not None:
        I_inf = sokhotski_plemelj(nu.m, 0.0, support=nu.support)
    else:
        I_inf = 0.0
    I_inf = I_inf + sum(w / s for s, w in nu.atoms)

    I_list, b_list = [], []
    for t in times:
        I = nu.integrate_ac(lambda s: _kernel(t, s), t)
        b = -nu.integrate_ac(lambda s: np.exp(-1j * t * s) / s, t, lo, min(-a, hi)) \
            - nu.integrate_ac(lambda s: np.exp(-1j * t * s) / s, t, max(a, lo), hi)
        for s, w in nu.atoms:
            I = I + w * _kernel(t, s)
            b = b - w * np.exp(-1j * t * s) / s
        I_list.append(I)
        b_list.append(b)
    I_arr = np.array(I_list, dtype=complex)
    b_arr = np.array(b_list, dtype=complex)
    I_inf = np.asarray(I_inf, dtype=complex)
    eps = I_arr - I_inf - b_arr
    return DecompositionResult(times, I_arr, I_inf[()] if I_inf.ndim == 0 else I_inf, b_arr, eps, a)


# --- co-area densities ---------------------------------------------------------


def spectral_density(h_mult, f, lam, h_prime=None, xi_range=None, n_grid=20001):
    """sum over h(xi) = lam of fhat(xi)/|h'(xi)|."""
    xi_range = xi_range if xi_range is not None else (-f.xi_max, f.xi_max)
    grid = np.linspace(*xi_range, n_grid)
    g = np.asarray(h_mult(grid), float) - lam
    if h_prime is None:
        def h_prime(x):
            d = 1e-6 * max(1.0, abs(x))
            return (h_mult(x + d) - h_mult(x - d)) / (2 * d)

    roots = list(grid[g == 0])
    idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    for i in idx:
        roots.append(optimize.brentq(lambda x: h_mult(x) - lam, grid[i], grid[i + 1], xtol=1e-15))
    # tangential contacts show up as tiny local minima of |g| without a sign change
    ag = np.abs(g)
    tiny = np.nonzero((ag[1:-1] <= ag[:-2]) & (ag[1:-1] <= ag[2:]) & (ag[1:-1] < 1e-10))[0] + 1
    roots.extend(grid[tiny])
    total = 0.0
    seen = []
    for x in roots:
        if any(abs(x - s) < 1e-9 for s in seen):
            continue
        seen.append(x)
        d = abs(float(h_prime(x)))
        if d < 1e-8:
            raise DegenerateLevel(f"|h'| = {d:.3g} at xi = {x:.6g}")
        total = total + f(x) / d
    return complex(total) if np.iscomplexobj(total) else float(total)
