"""Singular mode profiles sum_k v_k (y + i0)^(-1 + ik/lam) e^(ikx):
Gamma-function prefactors, the Fourier transform of regularized power
laws, synthesis of the field and the polynomial-growth test.

Fourier convention: F[g](eta) = int exp(-i y eta) g(y) dy.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sint

from ._quad import composite_nodes, extrapolate_to_zero, graded_edges, merge_edges, uniform_edges
from .errors import DomainError, EmptyData, ExtrapolationUnstable, GrowthViolation

# --- Gamma ---------------------------------------------------------------------

_LANCZOS_G = 7
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def complex_gamma_lanczos(z):
    """Gamma(z) for complex z (Lanczos, g = 7, nine coefficients)."""
    z = complex(z)
    if z.real < 0.5:
        return cmath.pi / (cmath.sin(cmath.pi * z) * complex_gamma_lanczos(1 - z))
    z -= 1
    x = _LANCZOS[0]
    for i, c in enumerate(_LANCZOS[1:], start=1):
        x += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return cmath.sqrt(2 * cmath.pi) * t ** (z + 0.5) * cmath.exp(-t) * x


def gamma_magnitude(alpha):
    """|Gamma(1 - i alpha)| = sqrt(pi alpha / sinh(pi alpha)), even in alpha."""
    a = abs(float(alpha))
    if a == 0:
        return 1.0
    x = math.pi * a
    # pi a / sinh(pi a) = 2x e^-x / (1 - e^-2x); take the root before e^-x underflows
    return math.sqrt(2 * x / -math.expm1(-2 * x)) * math.exp(-0.5 * x)


def gamma_prefactor(alpha):
    """gamma_alpha = -2 pi i exp(-alpha pi/2) / Gamma(1 - i alpha)."""
    return -2j * math.pi * math.exp(-alpha * math.pi / 2) / complex_gamma_lanczos(1 - 1j * alpha)


def gamma_prefactor_modulus(alpha):
    """|gamma_alpha| from the closed-form magnitude."""
    return 2 * math.pi * math.exp(-alpha * math.pi / 2) / gamma_magnitude(alpha)


def gamma_prefactor_asymptotic(alpha):
    """sqrt(2 pi/|alpha|) exp(pi alpha_-), the large-|alpha| form of |gamma_alpha|."""
    return math.sqrt(2 * math.pi / abs(alpha)) * math.exp(math.pi * max(-alpha, 0.0))


# --- Fourier transform of (y + i eps)^(-1 + i alpha) -------------------------------


def power_law(y, alpha, eps):
    """(y + i eps)^(-1 + i alpha), principal branch."""
    return np.exp((-1 + 1j * alpha) * np.log(np.asarray(y, float) + 1j * eps))


def _tail(g, A, eta):
    """int_A^inf g(y) exp(-i eta y) dy for complex g and eta != 0."""
    w = abs(eta)
    s = math.copysign(1.0, eta)
    out = 0j
    for part, unit in ((lambda y: g(y).real, 1.0), (lambda y: g(y).imag, 1j)):
        c, _ = sint.quad(part, A, np.inf, weight="cos", wvar=w, limlst=200)
        si, _ = sint.quad(part, A, np.inf, weight="sin", wvar=w, limlst=200)
        out += unit * (c - 1j * s * si)
    return out


def ft_regularized(alpha, eta, eps, A=20.0, order=16):
    """F[(y + i eps)^(-1 + i alpha)](eta) by quadrature on [-A, A] plus oscillatory tails."""
    eta = np.atleast_1d(np.asarray(eta, float))
    if np.any(eta == 0):
        raise DomainError("eta = 0 is not sampled")
    width = min(0.5, 1.0 / max(np.max(np.abs(eta)), 1e-12))
    edges = merge_edges(uniform_edges(-A, A, width), graded_edges(0.0, min(1.0, A), eps / 16))
    nodes, weights = composite_nodes(edges, order)
    vals = power_law(nodes, alpha, eps)
    core = (weights * vals) @ np.exp(-1j * np.outer(nodes, eta))
    right = np.array([_tail(lambda y: power_law(y, alpha, eps), A, e) for e in eta])
    # y -> -y on the left tail flips the sign of eta
    left = np.array([_tail(lambda y: power_law(-y, alpha, eps), A, -e) for e in eta])
    return core + right + left


@dataclass
class FTResult:
    eta: np.ndarray
    eps: np.ndarray
    samples: np.ndarray
    limit: np.ndarray
    closed_form: np.ndarray
    spread: np.ndarray

    @property
    def relative_error(self):
        scale = np.maximum(np.abs(self.closed_form), 1e-300)
        err = np.abs(self.limit - self.closed_form)
        return np.where(self.eta > 0, err / scale, err)


def ft_closed_form(alpha, eta, eps=0.0):
    eta = np.asarray(eta, float)
    g = gamma_prefactor(alpha)
    pos = np.where(eta > 0, eta, 1.0)
    return np.where(eta > 0, g * np.exp(-1j * alpha * np.log(pos)) * np.exp(-eps * pos), 0.0)


def ft_power_law(alpha, eta_grid, eps_sequence=(0.04, 0.02, 0.01, 0.005), rtol=1e-2):
    """Transform at each eps, then Neville extrapolation eps -> 0."""
    eps = np.asarray(eps_sequence, float)
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise DomainError("eps sequence must be positive and decreasing")
    eta = np.asarray(eta_grid, float)
    samples = np.array([ft_regularized(alpha, eta, e) for e in eps])
    table = extrapolate_to_zero(eps, list(samples))
    limit, prev = np.asarray(table[-1]), np.asarray(table[-2])
    spread = np.abs(limit - prev)
    scale = np.maximum(np.abs(limit), np.abs(gamma_prefactor(alpha)))
    if np.any(spread > rtol * scale):
        raise ExtrapolationUnstable(f"eps extrapolation spread {spread.max():.3g}")
    return FTResult(eta, eps, samples, limit, ft_closed_form(alpha, eta), spread)


# --- coefficients and synthesis ------------------------------------------------------


class ProfileCoefficients:
    """lam != 0 and finitely many v_k."""

    def __init__(self, lam, coeffs: dict):
        if lam == 0:
            raise DomainError("lam must be nonzero")
        if not coeffs:
            raise EmptyData("no coefficients")
        self.lam = float(lam)
        self.coeffs = {int(k): complex(v) for k, v in coeffs.items()}

    @property
    def ks(self):
        return np.array(sorted(self.coeffs))

    def values(self):
        return np.array([self.coeffs[k] for k in self.ks])

    def weighted(self):
        """|v_k| exp(pi (k/lam)_-)."""
        r = self.ks / self.lam
        return np.abs(self.values()) * np.exp(np.pi * np.maximum(-r, 0.0))


@dataclass(frozen=True)
class GrowthVerdict:
    admissible: bool
    degree: float
    log_constant: float
    exponential_rate: float


def growth_check(coeffs: ProfileCoefficients, rate_tol=0.05):
    """Fit the envelope max_{|k|<=j} |v_k| e^{pi (k/lam)_-} by C (1+j)^m.

    An exponential term e^{b j} is fitted alongside; the sequence is
    admissible when b stays below ``rate_tol``.
    """
    ks = coeffs.ks
    w = coeffs.weighted()
    jmax = int(np.max(np.abs(ks)))
    js = np.arange(jmax + 1)
    env = np.array([np.max(w[np.abs(ks) <= j], initial=0.0) for j in js])
    ok = env > 0
    js, env = js[ok], env[ok]
    if len(js) < 3:
        c = float(np.log(env.max())) if len(env) else -np.inf
        return GrowthVerdict(True, 0.0, c, 0.0)
    L = np.log1p(js)
    y = np.log(env)
    M = np.column_stack([np.ones_like(L), L, js])
    _, _, b = np.linalg.lstsq(M, y, rcond=None)[0]
    c, m = np.linalg.lstsq(M[:, :2], y, rcond=None)[0]
    return GrowthVerdict(bool(b <= rate_tol), float(m), float(c), float(b))


def synthesize_uinfty(coeffs: ProfileCoefficients, x_grid, y_grid, eps, check=True):
    """Field sum_k v_k (y + i eps)^(-1 + ik/lam) e^{ikx} on the (x, y) grid."""
    if check:
        verdict = growth_check(coeffs)
        if not verdict.admissible:
            raise GrowthViolation(f"weighted coefficients grow like e^({verdict.exponential_rate:.3g} k)")
    if not eps > 0:
        raise DomainError("eps must be positive")
    x = np.asarray(x_grid, float)[:, None]
    y = np.asarray(y_grid, float)[None, :]
    logz = np.log(y + 1j * eps)
    out = np.zeros((x.shape[0], y.shape[1]), complex)
    for k, v in coeffs.coeffs.items():
        out += v * np.exp((-1 + 1j * k / coeffs.lam) * logz) * np.exp(1j * k * x)
    return out


def eta_representation(coeffs: ProfileCoefficients, x_grid, eta_grid, eps=0.0):
    """sum_k gamma_{k/lam} v_k eta_+^{-ik/lam} e^{ikx} e^{-eps eta}."""
    x = np.asarray(x_grid, float)[:, None]
    eta = np.asarray(eta_grid, float)
    out = np.zeros((x.shape[0], eta.size), complex)
    for k, v in coeffs.coeffs.items():
        out += v * ft_closed_form(k / coeffs.lam, eta, eps)[None, :] * np.exp(1j * k * x)
    return out


def fft_eta(values, y_grid):
    """Discrete F[g](eta) on the FFT frequency grid for samples on a uniform y grid."""
    y = np.asarray(y_grid, float)
    dy = y[1] - y[0]
    n = y.size
    eta = 2 * np.pi * np.fft.fftfreq(n, d=dy)
    spec = dy * np.fft.fft(values) * np.exp(-1j * eta * y[0])
    order = np.argsort(eta)
    return eta[order], spec[order]


@dataclass(frozen=True)
class ModeProfile:
    lam: float
    k: int
    v: complex

    def symbol(self, eta):
        """gamma v eta_+^{-ik/lam}: modulus independent of eta > 0."""
        return self.v * ft_closed_form(self.k / self.lam, eta)


def field_csv(x_grid, y_grid, field):
    field = np.asarray(field)
    if field.size == 0:
        raise EmptyData("empty field")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "Re(u)", "Im(u)"])
    for i, x in enumerate(x_grid):
        for j, y in enumerate(y_grid):
            u = field[i, j]
            w.writerow([f"{x:.12g}", f"{y:.12g}", f"{u.real:.12g}", f"{u.imag:.12g}"])
    return buf.getvalue()


def eta_profile_csv(coeffs: ProfileCoefficients, eta_grid):
    eta = np.asarray(eta_grid, float)
    if eta.size == 0:
        raise EmptyData("empty eta grid")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "eta", "Re", "Im"])
    for k in coeffs.ks:
        vals = ModeProfile(coeffs.lam, int(k), coeffs.coeffs[int(k)]).symbol(eta)
        for e, v in zip(eta, vals):
            w.writerow([int(k), f"{e:.12g}", f"{v.real:.12g}", f"{v.imag:.12g}"])
    return buf.getvalue()
