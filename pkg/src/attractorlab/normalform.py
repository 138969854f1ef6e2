"""Conjugation constructions: Koenigs linearization of 1D maps, the wave
map between a cylinder flow and its linear model, the cohomological
transport equation and the profile ODE of the singular expansion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._quad import integrate, uniform_edges
from .errors import BasinEscape, DomainError, NoConvergence, NotConverged, QuadratureFailure

# --- Koenigs -------------------------------------------------------------------


def _invert(P, mu, y, tol=1e-15, maxit=60):
    # Newton for P(z) = y, starting from the linear guess
    z = y / mu
    for _ in range(maxit):
        h = 1e-7 * np.maximum(np.abs(z), 1e-3)
        dP = (P(z + h) - P(z - h)) / (2 * h)
        step = (P(z) - y) / dP
        z = z - step
        if np.all(np.abs(step) <= tol * np.maximum(np.abs(z), 1e-300)):
            return z
    raise NoConvergence("could not invert the map near the fixed point")


def koenigs_chart(P, mu, y, tol=1e-12, max_iter=200, basin=None):
    """h(y) = lim mu^-n P^n(y) for a map with P(0) = 0, P'(0) = mu.

    Expanding multipliers (|mu| > 1) are handled by iterating the inverse
    map, whose multiplier is 1/mu; the chart is the same.
    """
    if not (0 < abs(mu) and abs(mu) != 1):
        raise DomainError("multiplier must satisfy 0 < |mu| != 1")
    if abs(mu) > 1:
        fwd, mu_c = (lambda z: _invert(P, mu, z)), 1.0 / mu
    else:
        fwd, mu_c = P, mu
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y).copy()
    basin = basin if basin is not None else max(1.0, 10 * float(np.max(np.abs(y))))
    h = y.copy()
    scale = 1.0
    done = np.zeros(y.shape, bool)
    for n in range(1, max_iter + 1):
        y = fwd(y)
        scale /= mu_c
        h_new = y * scale
        if not np.all(np.isfinite(y)) or np.any(np.abs(y) > basin):
            raise NoConvergence(f"orbit left the basin after {n} iterations")
        done = np.abs(h_new - h) < tol * np.maximum(1.0, np.abs(h_new))
        h = h_new
        if np.all(done):
            return float(h[0]) if scalar else h
    raise NoConvergence(f"Koenigs iteration stalled after {max_iter} steps")


# --- cylinder flows --------------------------------------------------------------


class CylinderField:
    """Vector field (Vx, Vy) on (R/2piZ) x R, transverse to x = const."""

    def __init__(self, func, y_max=1.0, check_points=64):
        self.func = func
        self.y_max = float(y_max)
        xs, ys = np.meshgrid(np.linspace(0, 2 * np.pi, check_points),
                             np.linspace(-y_max, y_max, check_points))
        vx, _ = func(xs, ys)
        if np.any(np.asarray(vx) <= 0):
            raise DomainError("V_x must be positive on the verification strip")

    @classmethod
    def linear(cls, lam, y_max=1.0):
        return cls(lambda x, y: (np.ones_like(np.asarray(y, float)), -lam * np.asarray(y, float)), y_max)

    @classmethod
    def perturbed(cls, lam, eps=0.1, y_max=1.0):
        """V0 + (0, eps * y^2 sin x)."""
        return cls(lambda x, y: (np.ones_like(np.asarray(y, float)), -lam * y + eps * y**2 * np.sin(x)), y_max)

    def __call__(self, x, y):
        return self.func(x, y)

    def flow(self, q, t, dt=1e-2):
        """RK4 flow map; x is not reduced modulo 2pi."""
        n = max(1, int(math.ceil(abs(t) / dt)))
        h = t / n
        x, y = float(q[0]), float(q[1])
        for _ in range(n):
            k1 = self.func(x, y)
            k2 = self.func(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
            k3 = self.func(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
            k4 = self.func(x + h * k3[0], y + h * k3[1])
            x += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        return x, y


def linear_flow(lam, q, t):
    """Flow of V0 = d/dx - lam*y d/dy."""
    return q[0] + t, q[1] * math.exp(-lam * t)


def _interaction(V, lam, q, T, dt):
    # integrate w = U0(-t) U(t) q directly; its velocity decays with t
    def rhs(t, w):
        y = w[1] * math.exp(-lam * t)
        vx, vy = V(w[0] + t, y)
        return np.array([float(vx) - 1.0, math.exp(lam * t) * (float(vy) + lam * y)])

    n = max(1, int(math.ceil(T / dt)))
    h = T / n
    w = np.array(q, float)
    for i in range(n):
        t = i * h
        k1 = rhs(t, w)
        k2 = rhs(t + h / 2, w + h / 2 * k1)
        k3 = rhs(t + h / 2, w + h / 2 * k2)
        k4 = rhs(t + h, w + h * k3)
        w = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(w[1] * math.exp(-lam * (t + h))) > V.y_max or not np.all(np.isfinite(w)):
            raise BasinEscape(f"orbit left |y| <= {V.y_max} at t = {t + h:.4g}")
    return w


@dataclass(frozen=True)
class WaveMapResult:
    point: tuple
    gap: float
    horizon: float


def nelson_wave_map(V: CylinderField, lam, q, T=20.0, tol=1e-8, dt=1e-2, certify=True):
    """W(q) = U0(-T) U(T) q, certified by comparing horizons T and 2T."""
    if not lam > 0:
        raise DomainError("the cycle y = 0 must be attracting (lam > 0)")
    w_T = _interaction(V, lam, q, T, dt)
    if not certify:
        return WaveMapResult(tuple(w_T), float("nan"), T)
    w_2T = _interaction(V, lam, q, 2 * T, dt)
    gap = float(np.max(np.abs(w_2T - w_T)))
    if gap >= tol:
        raise NotConverged(f"wave map gap {gap:.3g} at horizon {T}", gap=gap)
    return WaveMapResult(tuple(float(v) for v in w_2T), gap, 2 * T)


def intertwining_residual(V: CylinderField, lam, q, s=1.0, T=20.0, dt=1e-2):
    """|W(U(s) q) - U0(s) W(q)|."""
    Wq = nelson_wave_map(V, lam, q, T, dt=dt).point
    Wuq = nelson_wave_map(V, lam, V.flow(q, s, dt), T, dt=dt).point
    return float(np.max(np.abs(np.subtract(Wuq, linear_flow(lam, Wq, s)))))


def conjugacy_report(V: CylinderField, lam, points, s=1.0, T=20.0):
    rows = [{"q": list(map(float, q)), "residual": intertwining_residual(V, lam, q, s, T)} for q in points]
    return json.dumps({"lambda": lam, "s": s, "horizon": T,
                       "max_residual": max(r["residual"] for r in rows), "points": rows}, indent=2)


# --- oscillatory Laplace-type integrals ----------------------------------------


def _laplace_integral(f, a, b, rtol=1e-10, atol=1e-14, max_refine=6):
    """int_0^inf exp(-a u + i b u) f(u) du for decaying a > 0.

    Composite Gauss-Legendre with panel width tied to the oscillation;
    accepted when two orders agree.
    """
    upper = 38.0 / a
    width = min(1.0, 2.0 / max(abs(b), 1e-12), upper / 8)
    for _ in range(max_refine):
        edges = uniform_edges(0.0, upper, width)

        def g(u):
            fu = np.asarray(f(u))
            w = np.exp((-a + 1j * b) * u)
            return w.reshape(w.shape + (1,) * (fu.ndim - 1)) * fu

        lo = integrate(g, edges, order=12)
        hi = integrate(g, edges, order=20)
        err = np.max(np.abs(hi - lo))
        if err <= rtol * np.max(np.abs(hi)) + atol:
            return hi
        width /= 2
    raise QuadratureFailure(f"tau-quadrature error {err:.3g} above tolerance")


class CohomologicalSolution:
    """alpha solving s(d_y alpha + lam d_s alpha) + (lam n - i k) alpha = rho."""

    def __init__(self, lam, n, k, rho):
        if lam == 0:
            raise DomainError("lam must be nonzero")
        if n < 1:
            raise DomainError("order n must be at least 1")
        self.lam, self.n, self.k, self.rho = lam, n, k, rho

    def __call__(self, y, s):
        y, s = np.broadcast_arrays(np.asarray(y, float), np.asarray(s, float))
        lam = self.lam
        # tau = exp(-u): tau^(n-1-ik/lam) dtau = exp(-n u + i k u / lam) du
        def f(u):
            tau = np.exp(-u)[:, None]
            return self.rho(y.ravel()[None] + (tau - 1) * s.ravel()[None] / lam, tau * s.ravel()[None])

        val = _laplace_integral(f, self.n, self.k / lam) / lam
        out = np.asarray(val).reshape(y.shape)
        return out[()] if out.ndim == 0 else out

    def residual(self, y, s, h=1e-3):
        """PDE residual with central differences of step h."""
        dy = (self(y + h, s) - self(y - h, s)) / (2 * h)
        ds = (self(y, s + h) - self(y, s - h)) / (2 * h)
        lhs = s * (dy + self.lam * ds) + (self.lam * self.n - 1j * self.k) * self(y, s)
        return lhs - self.rho(np.asarray(y, float), np.asarray(s, float))


def solve_cohomological(lam, n, k, rho):
    return CohomologicalSolution(lam, n, k, rho)


class ProfileSolution:
    """v(y) = int_0^1 s^(-ik/lam) g(ys) ds + l_plus * y^(-1 + ik/lam), y > 0."""

    def __init__(self, lam, k, g, l_plus=0.0, g_prime=None):
        if lam == 0:
            raise DomainError("lam must be nonzero")
        self.lam, self.k, self.g, self.l_plus = lam, k, g, complex(l_plus)
        self.g_prime = g_prime

    def _check(self, y):
        y = np.asarray(y, float)
        if np.any(y <= 0):
            raise DomainError("profile is evaluated on y > 0")
        return y

    def smooth_part(self, y):
        y = np.asarray(y, float)
        flat = np.atleast_1d(y).ravel()
        # s = exp(-u): s^(-ik/lam) ds = exp(-u + i k u / lam) du
        val = _laplace_integral(lambda u: self.g(flat[None] * np.exp(-u)[:, None]), 1.0, self.k / self.lam)
        return np.asarray(val).reshape(y.shape)

    def __call__(self, y):
        y = self._check(y)
        out = self.smooth_part(y) + self.l_plus * y ** (-1 + 1j * self.k / self.lam)
        return out[()] if out.ndim == 0 else out

    def y_derivative(self, y):
        """y dv/dy, differentiating under the integral."""
        y = self._check(y)
        gp = self.g_prime
        if gp is None:
            def gp(z):
                h = 1e-5 * np.maximum(np.abs(z), 1.0)
                return (self.g(z + h) - self.g(z - h)) / (2 * h)
        flat = np.atleast_1d(y).ravel()

        def f(u):
            z = flat[None] * np.exp(-u)[:, None]
            return z * gp(z)

        smooth = np.asarray(_laplace_integral(f, 1.0, self.k / self.lam)).reshape(y.shape)
        sing = self.l_plus * (-1 + 1j * self.k / self.lam) * y ** (-1 + 1j * self.k / self.lam)
        return smooth + sing

    def residual(self, y):
        """(ik - lam(y d_y + 1)) v + lam g."""
        y = self._check(y)
        return (1j * self.k - self.lam) * self(y) - self.lam * self.y_derivative(y) + self.lam * self.g(y)


def solve_profile_ode(lam, k, g, l_plus=0.0, g_prime=None):
    return ProfileSolution(lam, k, g, l_plus, g_prime)
