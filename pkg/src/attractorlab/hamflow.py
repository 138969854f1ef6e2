"""Homogeneous symbols on T*X, their Hamiltonian flows, Poisson brackets,
and escape functions.

Phase points are pairs (x, p) of arrays with a trailing axis of length 2.
Bracket convention: {f, g} = dp f . dx g - dx f . dp g, so that
dg/dt = {h, g} along the flow of h.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import BlowUp, DomainError, EmptyShell, InvalidBump

FD_STEP = 1e-6


class Symbol:
    """A function on T*X with (optionally analytic) gradient.

    ``func(x, p)`` and ``grad(x, p) -> (dx, dp)`` must broadcast over
    leading axes.  Without ``grad`` central differences are used.
    """

    def __init__(self, func, grad=None, degree=0, name=""):
        self.func = func
        self._grad = grad
        self.degree = degree
        self.name = name

    def __call__(self, x, p):
        x, p = _as_pair(x, p)
        return self.func(x, p)

    def gradient(self, x, p):
        x, p = _as_pair(x, p)
        if self._grad is not None:
            dx, dp = self._grad(x, p)
            return np.broadcast_to(dx, x.shape).astype(float), np.broadcast_to(dp, p.shape).astype(float)
        return _fd_gradient(self.func, x, p)

    def with_fd_gradient(self):
        return Symbol(self.func, None, self.degree, self.name + " (fd)")

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        grad = None
        if self._grad is not None:
            def grad(x, p, g=self._grad):
                dx, dp = g(x, p)
                return c * dx, c * dp
        return Symbol(lambda x, p: c * self.func(x, p), grad, self.degree, self.name)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Symbol):
            return NotImplemented
        grad = None
        if self._grad is not None and other._grad is not None:
            def grad(x, p):
                a, b = self.gradient(x, p), other.gradient(x, p)
                return a[0] + b[0], a[1] + b[1]
        deg = self.degree if self.degree == other.degree else None
        return Symbol(lambda x, p: self.func(x, p) + other.func(x, p), grad, deg,
                      f"{self.name}+{other.name}")


def _as_pair(x, p):
    return np.asarray(x, dtype=float), np.asarray(p, dtype=float)


def _fd_gradient(func, x, p):
    z = np.concatenate([x, p], axis=-1)
    out = np.empty(z.shape)
    for i in range(z.shape[-1]):
        h = FD_STEP * np.maximum(np.abs(z[..., i]), 1.0)
        zp, zm = z.copy(), z.copy()
        zp[..., i] += h
        zm[..., i] -= h
        fp = func(zp[..., :2], zp[..., 2:])
        fm = func(zm[..., :2], zm[..., 2:])
        out[..., i] = (fp - fm) / (2 * h)
    return out[..., :2], out[..., 2:]


@dataclass(frozen=True)
class PhasePoint:
    x: tuple
    p: tuple

    def __post_init__(self):
        if math.hypot(*self.p) == 0:
            raise DomainError("wavenumber must be nonzero")


# --- concrete symbols -----------------------------------------------------------


def internal_wave_symbol(N=1.0):
    """h(x, p) = N |p1| / |p| for 2D internal waves."""
    if not N > 0:
        raise DomainError("buoyancy frequency must be positive")

    def _norm(p):
        r = np.hypot(p[..., 0], p[..., 1])
        if np.any(r == 0):
            raise DomainError("symbol undefined at p = 0")
        return r

    def func(x, p):
        return N * np.abs(p[..., 0]) / _norm(p)

    def grad(x, p):
        r = _norm(p)
        p1, p3 = p[..., 0], p[..., 1]
        dp = np.stack([N * np.sign(p1) * p3**2 / r**3, -N * np.abs(p1) * p3 / r**3], axis=-1)
        return np.zeros_like(x), dp

    return Symbol(func, grad, degree=0, name="internal_wave")


def toy_symbol(lam):
    """h0(x, y, xi, eta) = xi/eta - lam*y."""
    if lam == 0:
        raise DomainError("cycle exponent must be nonzero")

    def func(x, p):
        return p[..., 0] / p[..., 1] - lam * x[..., 1]

    def grad(x, p):
        xi, eta = p[..., 0], p[..., 1]
        dx = np.stack([np.zeros_like(xi), np.full_like(xi, -lam)], axis=-1)
        dp = np.stack([1.0 / eta, -xi / eta**2], axis=-1)
        return dx, dp

    return Symbol(func, grad, degree=0, name=f"toy(lam={lam})")


def conjugated_toy_symbol(lam, phi_mult):
    """h = Phi^2 * h0 for a degree-0, non-vanishing multiplier Phi."""
    h0 = toy_symbol(lam)
    if not isinstance(phi_mult, Symbol):
        phi_mult = Symbol(phi_mult, degree=0)

    def func(x, p):
        return phi_mult(x, p) ** 2 * h0(x, p)

    def grad(x, p):
        f = phi_mult(x, p)
        fdx, fdp = phi_mult.gradient(x, p)
        g = h0(x, p)
        gdx, gdp = h0.gradient(x, p)
        return (2 * f * g)[..., None] * fdx + (f**2)[..., None] * gdx, \
            (2 * f * g)[..., None] * fdp + (f**2)[..., None] * gdp

    return Symbol(func, grad, degree=0, name=f"Phi^2 toy(lam={lam})")


def cycle_pair_symbol(lam):
    """h = xi/eta - lam*sin(y) on the 2-torus.

    Cycles y = 0 and y = pi, of opposite stability.  In the chart
    Y = tan(y/2) (and Y = tan((y - pi)/2) near pi, exponent -lam) it
    reads Phi^2 (xi/eta_Y - lam*Y) with Phi^2 = 1 + cos(y) (resp. 1 - cos(y)).
    """
    if lam == 0:
        raise DomainError("cycle exponent must be nonzero")

    def func(x, p):
        return p[..., 0] / p[..., 1] - lam * np.sin(x[..., 1])

    def grad(x, p):
        xi, eta = p[..., 0], p[..., 1]
        y = x[..., 1]
        dx = np.stack([np.zeros_like(y), -lam * np.cos(y)], axis=-1)
        dp = np.stack([1.0 / eta, -xi / eta**2], axis=-1)
        return dx, dp

    return Symbol(func, grad, degree=0, name=f"cycle_pair(lam={lam})")


# --- flows ----------------------------------------------------------------------


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    h: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x1", "x2", "p1", "p2", "h"])
        for row in zip(self.t, self.x[:, 0], self.x[:, 1], self.p[:, 0], self.p[:, 1], self.h):
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


def flow_integrate(symbol: Symbol, z0, t_end, dt, sample_every=1, p_bounds=(1e-8, 1e12)):
    """Classical RK4 for dx/dt = dh/dp, dp/dt = -dh/dx."""
    if not dt > 0:
        raise DomainError("time step must be positive")
    if isinstance(z0, PhasePoint):
        x, p = np.array(z0.x, float), np.array(z0.p, float)
    else:
        x, p = (np.array(a, float) for a in z0)

    def rhs(x, p):
        dx, dp = symbol.gradient(x, p)
        return dp, -dx

    n_steps = int(round(t_end / dt))
    if not math.isclose(n_steps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise DomainError("t_end must be a multiple of dt")
    ts, xs, ps = [0.0], [x.copy()], [p.copy()]
    lo, hi = p_bounds
    for k in range(1, n_steps + 1):
        k1x, k1p = rhs(x, p)
        k2x, k2p = rhs(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p)
        k3x, k3p = rhs(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p)
        k4x, k4p = rhs(x + dt * k3x, p + dt * k3p)
        x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        p = p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        r = math.hypot(*p)
        if not lo <= r <= hi or not np.all(np.isfinite(x)):
            raise BlowUp(f"|p| = {r:.3g} left [{lo}, {hi}] at t = {k * dt:.6g}")
        if k % sample_every == 0 or k == n_steps:
            ts.append(k * dt)
            xs.append(x.copy())
            ps.append(p.copy())
    xs, ps = np.array(xs), np.array(ps)
    return Trajectory(np.array(ts), xs, ps, np.asarray(symbol(xs, ps)))


@dataclass(frozen=True)
class ToyModelState:
    x: float
    y: float
    xi: float
    eta: float


def toy_flow_exact(lam, z0: ToyModelState, t, period=1.0):
    """Closed-form flow of xi/eta - lam*y (x taken modulo ``period``).

    y is recovered from conservation of h0, which reduces to
    y = xi/(lam*eta) on the zero-energy shell.
    """
    ratio = 1.0 + lam * t / z0.eta
    if ratio <= 0:
        raise DomainError("1 + lam*t/eta0 must stay positive")
    c = z0.xi / z0.eta - lam * z0.y
    eta = z0.eta + lam * t
    x = math.fmod(z0.x + math.log(ratio) / lam, period)
    if x < 0 and math.isfinite(period):
        x += period
    y = (z0.xi / eta - c) / lam
    return ToyModelState(x, y, z0.xi, eta)


def toy_poincare(lam, y, eta, period=1.0):
    """Return map of the section x = 0 of the zero-energy toy flow."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    return math.exp(-lam * period) * y, math.exp(lam * period) * eta


def poisson_bracket(f: Symbol, g: Symbol, x, p):
    fdx, fdp = f.gradient(x, p)
    gdx, gdp = g.gradient(x, p)
    return np.sum(fdp * gdx - fdx * gdp, axis=-1)


# --- escape functions -----------------------------------------------------------


class Bump:
    """Even C-infinity cutoff equal to 1 on [-k, k], tapering to 0 over a width w.

    Taper: 1/(1 + exp(1/(1-u) - 1/u)) with u = (|y| - k)/w, flat to all
    orders at both ends.
    """

    def __init__(self, k, width=None):
        if not k > 0:
            raise InvalidBump("plateau half-width must be positive")
        self.k = float(k)
        self.width = float(width if width is not None else k)

    @property
    def support(self):
        return self.k + self.width

    def _taper(self, y):
        u = (np.abs(np.asarray(y, float)) - self.k) / self.width
        inner = (u > 0) & (u < 1)
        us = np.where(inner, u, 0.5)
        return u, inner, us, expit(1.0 / us - 1.0 / (1.0 - us))

    def __call__(self, y):
        u, inner, _, t = self._taper(y)
        return np.where(u <= 0, 1.0, np.where(inner, t, 0.0))

    def derivative(self, y):
        u, inner, us, t = self._taper(y)
        du = -t * (1 - t) * (1 / us**2 + 1 / (1 - us) ** 2) / self.width
        return np.where(inner, np.sign(y) * du, 0.0)


def check_bump(bump, grid=None):
    grid = np.linspace(-2 * bump.support, 2 * bump.support, 20001) if grid is None else grid
    vals = bump(grid)
    if np.any(vals < 0) or np.any(vals > 1):
        raise InvalidBump("bump must take values in [0, 1]")
    if np.any(grid * bump.derivative(grid) > 1e-14):
        raise InvalidBump("bump must satisfy y * bump'(y) <= 0")
    return True


class EscapeField(Symbol):
    """Degree-1 local escape function lam * eta * bump(y) in a toy chart."""

    def __init__(self, lam, bump, func, grad, name):
        super().__init__(func, grad, degree=1, name=name)
        self.lam = lam
        self.bump = bump

    def predicted_bracket(self, y):
        """lam^2 (bump - y bump') on the shell, for Phi = 1."""
        return self.lam**2 * (self.bump(y) - y * self.bump.derivative(y))


def local_escape(lam, k=1.0, bump=None):
    if lam == 0:
        raise DomainError("cycle exponent must be nonzero")
    bump = bump if bump is not None else Bump(k)
    check_bump(bump)

    def func(x, p):
        return lam * p[..., 1] * bump(x[..., 1])

    def grad(x, p):
        y, eta = x[..., 1], p[..., 1]
        dx = np.stack([np.zeros_like(y), lam * eta * bump.derivative(y)], axis=-1)
        dp = np.stack([np.zeros_like(y), lam * bump(y)], axis=-1)
        return dx, dp

    return EscapeField(lam, bump, func, grad, f"escape(lam={lam}, k={bump.k})")


def cycle_pair_escape(lam, k=1.0, bump=None):
    """Sum of the two chart escape functions of :func:`cycle_pair_symbol`.

    Stable chart: lam * eta_Y * bump(Y), Y = tan(y/2), eta_Y = eta (1 + cos y).
    Unstable chart: -lam * eta_Y * bump(Y), Y = -cot(y/2), eta_Y = eta (1 - cos y).
    """
    bump = bump if bump is not None else Bump(k)
    check_bump(bump)
    support = bump.support

    def pieces(y):
        # chart coordinate, its y-derivative, momentum factor and its derivative
        half = 0.5 * y
        with np.errstate(divide="ignore", invalid="ignore"):
            ys = np.tan(half)
            yu = -1.0 / np.tan(half)
        ok_s = np.abs(np.cos(half)) > 1e-300
        ok_u = np.abs(np.sin(half)) > 1e-300
        ys = np.where(ok_s & (np.abs(ys) < support), ys, 2 * support)
        yu = np.where(ok_u & (np.abs(yu) < support), yu, 2 * support)
        return ys, yu

    def func(x, p):
        y, eta = x[..., 1], p[..., 1]
        ys, yu = pieces(y)
        return lam * eta * ((1 + np.cos(y)) * bump(ys) - (1 - np.cos(y)) * bump(yu))

    def grad(x, p):
        y, eta = x[..., 1], p[..., 1]
        ys, yu = pieces(y)
        # d/dy[(1 + cos y) bump(tan(y/2))] = -sin y bump + bump'(Y), since
        # (1 + cos y) * dY/dy = 1; likewise for the unstable chart
        ds = -np.sin(y) * bump(ys) + bump.derivative(ys)
        du = np.sin(y) * bump(yu) + bump.derivative(yu)
        dy = lam * eta * (ds - du)
        dx = np.stack([np.zeros_like(y), dy], axis=-1)
        deta = lam * ((1 + np.cos(y)) * bump(ys) - (1 - np.cos(y)) * bump(yu))
        dp = np.stack([np.zeros_like(y), deta], axis=-1)
        return dx, dp

    field = EscapeField(lam, bump, func, grad, f"cycle_pair_escape(lam={lam}, k={bump.k})")

    def predicted(y):
        ys, yu = pieces(np.asarray(y, float))
        stable = (1 + np.cos(y)) * (bump(ys) - ys * bump.derivative(ys))
        unstable = (1 - np.cos(y)) * (bump(yu) - yu * bump.derivative(yu))
        return lam**2 * (stable + unstable)

    field.predicted_bracket = predicted
    return field


def shell_points(symbol: Symbol, omega0, positions, n_angles=256, tol=1e-10):
    """Project onto h = omega0 by root-finding in the angle of p = (cos t, sin t).

    Returns (x, p) arrays with every root found for each position.
    """
    positions = np.atleast_2d(np.asarray(positions, float))
    theta = np.linspace(-np.pi, np.pi, n_angles + 1)
    X = np.repeat(positions[:, None, :], theta.size, axis=1)
    P = np.stack([np.cos(theta), np.sin(theta)], axis=-1)[None].repeat(len(positions), 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = symbol(X, P) - omega0
    sign_change = np.sign(g[:, :-1]) * np.sign(g[:, 1:]) < 0
    i_pos, i_ang = np.nonzero(sign_change & np.isfinite(g[:, :-1]) & np.isfinite(g[:, 1:]))
    if i_pos.size == 0:
        raise EmptyShell("no sign change of h - omega0 on the sampled directions")
    lo, hi = theta[i_ang], theta[i_ang + 1]
    xs = positions[i_pos]
    glo = g[i_pos, i_ang]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            gm = symbol(xs, np.stack([np.cos(mid), np.sin(mid)], -1)) - omega0
        left = np.sign(gm) == np.sign(glo)
        lo = np.where(left, mid, lo)
        glo = np.where(left, gm, glo)
        hi = np.where(left, hi, mid)
    t = 0.5 * (lo + hi)
    ps = np.stack([np.cos(t), np.sin(t)], -1)
    resid = np.abs(symbol(xs, ps) - omega0)
    keep = resid < tol
    if not np.any(keep):
        raise EmptyShell("no sample satisfies h = omega0 within tolerance")
    return xs[keep], ps[keep]


@dataclass(frozen=True)
class EscapeReport:
    min_bracket: float
    argmin: tuple
    n_samples: int

    @property
    def positive(self):
        return self.min_bracket > 0

    def to_json(self):
        return json.dumps(
            {"min_bracket": self.min_bracket, "argmin": list(self.argmin), "n_samples": self.n_samples},
            sort_keys=True,
        )


def escape_positivity(h: Symbol, d: Symbol, samples, omega0=0.0, tol=1e-10):
    """Minimum of {h, d} over shell samples ``(x, p)``."""
    x, p = (np.asarray(a, float) for a in samples)
    if x.size == 0:
        raise EmptyShell("no samples")
    on_shell = np.abs(h(x, p) - omega0) <= tol
    if not np.any(on_shell):
        raise EmptyShell("no sample satisfies h = omega0")
    x, p = x[on_shell], p[on_shell]
    br = poisson_bracket(h, d, x, p)
    i = int(np.argmin(br))
    argmin = tuple(float(v) for v in np.concatenate([x[i], p[i]]))
    return EscapeReport(float(br[i]), argmin, int(len(br)))
