"""Ray dynamics of 2D internal waves in a trapezium.

Geometry: depth 1, vertical wall at x1 = 0, horizontal bottom and top,
and a sloping wall on the right through (L, 0) and (L - cot(alpha), 1).
A ray at forcing angle phi moves along (s1 cos phi, s3 sin phi); its
wavenumber is kappa * (s1 sin phi, -s3 cos phi), orthogonal to the group
velocity of h = |p1| / |p|.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import (
    CornerAbsorbed,
    CriticalSlope,
    DomainError,
    NumericalFailure,
    SectionUnavailable,
)

WALLS = ("bottom", "slope", "top", "left")
CORNER_TOL = 1e-9
CRITICAL_TOL = 1e-9


@dataclass(frozen=True)
class TrapeziumDomain:
    length: float
    alpha: float
    corner_tol: float = CORNER_TOL
    critical_tol: float = CRITICAL_TOL

    def __post_init__(self):
        if not 0.0 < self.alpha <= math.pi / 2:
            raise DomainError(f"slope angle must lie in (0, pi/2], got {self.alpha}")
        if self.length <= self.cot_alpha:
            raise DomainError(
                f"length {self.length} must exceed 1/tan(alpha) = {self.cot_alpha:.6g}"
            )

    @classmethod
    def rectangle(cls, length):
        """Rectangle limit: the sloping wall becomes the vertical wall x1 = L."""
        return cls(length, math.pi / 2)

    @property
    def cot_alpha(self):
        return 0.0 if self.alpha == math.pi / 2 else math.cos(self.alpha) / math.sin(self.alpha)

    @property
    def top_length(self):
        return self.length - self.cot_alpha

    @property
    def vertices(self):
        L = self.length
        return np.array([[0.0, 0.0], [L, 0.0], [L - self.cot_alpha, 1.0], [0.0, 1.0]])

    def outward_normal(self, wall):
        if wall == "bottom":
            return np.array([0.0, -1.0])
        if wall == "top":
            return np.array([0.0, 1.0])
        if wall == "left":
            return np.array([-1.0, 0.0])
        if wall == "slope":
            if self.alpha == math.pi / 2:
                return np.array([1.0, 0.0])
            return np.array([math.sin(self.alpha), math.cos(self.alpha)])
        raise DomainError(f"unknown wall {wall!r}")

    def tangent(self, wall):
        n = self.outward_normal(wall)
        return np.array([-n[1], n[0]])

    def slope_x(self, x3):
        """Abscissa of the sloping wall at height x3."""
        return self.length - x3 * self.cot_alpha

    def slope_point(self, height):
        return np.array([self.slope_x(height), height])

    def contains(self, point, tol=1e-12):
        x1, x3 = point
        return (
            -tol <= x3 <= 1 + tol
            and x1 >= -tol
            and x1 <= self.slope_x(x3) + tol
        )

    def distance_to_wall(self, point, wall):
        x1, x3 = point
        if wall == "bottom":
            return abs(x3)
        if wall == "top":
            return abs(x3 - 1.0)
        if wall == "left":
            return abs(x1)
        n = self.outward_normal("slope")
        return abs(n @ (np.asarray(point) - self.slope_point(0.0)))

    def near_corner(self, point):
        d = np.hypot(*(self.vertices - np.asarray(point)).T)
        return bool(np.min(d) < self.corner_tol)


@dataclass(frozen=True)
class RayState:
    x1: float
    x3: float
    sigma1: int
    sigma3: int
    phi: float
    kappa: float = 1.0

    def __post_init__(self):
        if self.sigma1 not in (1, -1) or self.sigma3 not in (1, -1):
            raise DomainError("direction signs must be +1 or -1")
        if not 0.0 < self.phi < math.pi / 2:
            raise DomainError(f"direction angle must lie in (0, pi/2), got {self.phi}")
        if not self.kappa > 0:
            raise DomainError("wavenumber factor must be positive")

    @property
    def position(self):
        return np.array([self.x1, self.x3])

    @property
    def direction(self):
        return np.array([self.sigma1 * math.cos(self.phi), self.sigma3 * math.sin(self.phi)])

    @property
    def wavenumber(self):
        return self.kappa * np.array(
            [self.sigma1 * math.sin(self.phi), -self.sigma3 * math.cos(self.phi)]
        )

    def at(self, point):
        return replace(self, x1=float(point[0]), x3=float(point[1]))


def admissible_directions(omega0, N=1.0):
    """Forcing angle and the four unit ray directions at frequency omega0.

    Order: (+,+), (+,-), (-,+), (-,-) for (sign of v1, sign of v3).
    """
    if not 0.0 < omega0 < N:
        raise DomainError(f"need 0 < omega0 < N, got omega0={omega0}, N={N}")
    phi = math.asin(omega0 / N)
    c, s = math.cos(phi), math.sin(phi)
    dirs = np.array([[c, s], [c, -s], [-c, s], [-c, -s]])
    return phi, dirs


def _phase_matched_wavenumber(p, normal, phi):
    """Second intersection of the line p + s*normal with the cone
    |p1|/|p| = sin(phi); the first one is p itself (s = 0)."""
    c2, s2 = math.cos(phi) ** 2, math.sin(phi) ** 2
    a = normal[0] ** 2 * c2 - normal[1] ** 2 * s2
    b = 2.0 * (p[0] * normal[0] * c2 - p[1] * normal[1] * s2)
    return a, b


def reflect(state: RayState, wall: str, domain: TrapeziumDomain) -> RayState:
    """Reflect a ray off ``wall``: the wavenumber jump is normal to the wall
    and the reflected wavenumber stays on the dispersion cone."""
    pos = state.position
    if domain.near_corner(pos):
        raise CornerAbsorbed(f"hit point {pos} within {domain.corner_tol} of a vertex")
    if domain.distance_to_wall(pos, wall) > 1e-9:
        raise DomainError(f"point {pos} is not on the {wall} wall")
    n = domain.outward_normal(wall)
    if wall == "slope" and abs(state.phi - domain.alpha) < domain.critical_tol:
        raise CriticalSlope(f"|phi - alpha| = {abs(state.phi - domain.alpha):.3g}")
    v = state.direction
    vn = float(v @ n)
    if abs(vn) < 1e-14:
        raise CornerAbsorbed(f"ray tangent to the {wall} wall")
    if vn < 0:
        raise DomainError(f"incoming direction points into the domain at the {wall} wall")

    p = state.wavenumber
    a, b = _phase_matched_wavenumber(p, n, state.phi)
    if abs(a) < 1e-15:
        raise CriticalSlope("reflected wavenumber degenerate")
    p_new = p - (b / a) * n
    kappa = float(np.hypot(*p_new))
    out = RayState(
        state.x1,
        state.x3,
        int(np.sign(p_new[0])),
        -int(np.sign(p_new[1])),
        state.phi,
        kappa,
    )
    if out.direction @ n >= 0:
        raise NumericalFailure(f"reflected ray does not point inward at the {wall} wall")
    return out


def reflect_by_enumeration(state, wall, domain):
    """Cross-check for :func:`reflect`: search the three other sign
    patterns for an inward direction whose wavenumber has the same
    tangential component, with positive magnitude."""
    n = domain.outward_normal(wall)
    t = domain.tangent(wall)
    pt = state.wavenumber @ t
    hits = []
    for s1 in (1, -1):
        for s3 in (1, -1):
            if (s1, s3) == (state.sigma1, state.sigma3):
                continue
            cand = RayState(state.x1, state.x3, s1, s3, state.phi, 1.0)
            if cand.direction @ n >= 0:
                continue
            unit_t = cand.wavenumber @ t
            if abs(unit_t) < 1e-15:
                continue
            kappa = pt / unit_t
            if kappa > 0:
                hits.append(replace(cand, kappa=kappa))
    return hits


def slope_reflection_factor(alpha, phi):
    """|p3| gain at a focusing bounce on the slope (phi < alpha)."""
    return math.sin(phi + alpha) / math.sin(alpha - phi)


@dataclass(frozen=True)
class BounceEvent:
    point: tuple
    wall: str
    incoming: tuple
    outgoing: tuple
    kappa: float


@dataclass
class RayPath:
    start: RayState
    events: list = field(default_factory=list)
    status: str = "max_bounces"

    def points(self):
        return np.array([[self.start.x1, self.start.x3]] + [e.point for e in self.events])

    def slope_heights(self):
        return np.array([e.point[1] for e in self.events if e.wall == "slope"])

    def slope_events(self):
        return [e for e in self.events if e.wall == "slope"]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bounce", "x1", "x3", "wall", "sigma1", "sigma3", "kappa"])
        for i, e in enumerate(self.events, start=1):
            w.writerow(
                [i, repr(e.point[0]), repr(e.point[1]), e.wall, e.outgoing[0], e.outgoing[1], repr(e.kappa)]
            )
        return buf.getvalue()


def _next_hit(domain, state):
    x1, x3 = state.x1, state.x3
    v1, v3 = state.direction
    cands = []
    if v3 < 0:
        cands.append((-x3 / v3, "bottom"))
    if v3 > 0:
        cands.append(((1.0 - x3) / v3, "top"))
    if v1 < 0:
        cands.append((-x1 / v1, "left"))
    n = domain.outward_normal("slope")
    vn = n[0] * v1 + n[1] * v3
    if vn > 0:
        gap = domain.length * n[0] - (n[0] * x1 + n[1] * x3)
        cands.append((gap / vn, "slope"))
    cands.sort()
    tau, wall = cands[0]
    tau = max(tau, 0.0)
    point = np.array([x1 + tau * v1, x3 + tau * v3])
    # snap onto the wall to stop drift
    if wall == "bottom":
        point[1] = 0.0
    elif wall == "top":
        point[1] = 1.0
    elif wall == "left":
        point[0] = 0.0
    else:
        point[0] = domain.slope_x(point[1])
    tie = len(cands) > 1 and abs(cands[1][0] - tau) < domain.corner_tol
    return point, wall, tie


def trace(domain: TrapeziumDomain, state: RayState, max_bounces: int = 1000) -> RayPath:
    """Follow a ray through successive reflections."""
    if not domain.contains(state.position, tol=0.0) or any(
        domain.distance_to_wall(state.position, w) == 0.0 for w in WALLS
    ):
        raise DomainError("start position must lie strictly inside the domain")
    path = RayPath(start=state)
    cur = state
    for _ in range(max_bounces):
        point, wall, tie = _next_hit(domain, cur)
        at_wall = cur.at(point)
        if tie or domain.near_corner(point):
            path.status = "corner_absorbed"
            return path
        try:
            out = reflect(at_wall, wall, domain)
        except CriticalSlope:
            path.status = "critical_slope"
            return path
        except CornerAbsorbed:
            path.status = "corner_absorbed"
            return path
        path.events.append(
            BounceEvent(
                (float(point[0]), float(point[1])),
                wall,
                (cur.sigma1, cur.sigma3),
                (out.sigma1, out.sigma3),
                out.kappa,
            )
        )
        cur = out
    path.status = "max_bounces"
    return path


# --- Poincare return map on the sloping wall -------------------------------
#
# Image method: reflecting the domain across its horizontal walls gives a
# vertically 2-periodic strip whose right boundary is the zig-zag
# X(theta) = L - cot(alpha) * tri(theta), tri(theta) = 1 - |theta mod 2 - 1|.
# For phi < alpha the slope and the left wall both preserve the vertical
# sign, so the unfolded ray always climbs.  A slope point at physical height
# h leaving upward has theta = h, leaving downward has theta = 2 - h; the
# circle coordinate is s = theta / 2 mod 1.


def _tri(theta):
    return 1.0 - np.abs(np.mod(theta, 2.0) - 1.0)


def _lift(theta, length, cot_a, tan_p):
    """Unfolded return map theta -> theta'' > theta (vectorised)."""
    theta, length, cot_a, tan_p = np.broadcast_arrays(
        np.asarray(theta, float), np.asarray(length, float),
        np.asarray(cot_a, float), np.asarray(tan_p, float),
    )
    theta_l = theta + (length - cot_a * _tri(theta)) * tan_p
    m0 = np.floor(theta_l)
    n_pieces = int(np.ceil(np.max(length * tan_p))) + 2
    ks = np.arange(n_pieces)
    m = m0[..., None] + ks
    ends = m + 1.0
    # G(u) = (u - theta_l)/tan_p - X(u) is increasing; first piece with G(end) >= 0
    g_end = (ends - theta_l[..., None]) / tan_p[..., None] - (
        length[..., None] - cot_a[..., None] * _tri(ends)
    )
    first = np.argmax(g_end >= 0.0, axis=-1)
    mm = m0 + first
    even = np.mod(mm, 2.0) == 0.0
    inv_t = 1.0 / tan_p
    u_even = (length + theta_l * inv_t + cot_a * mm) / (inv_t + cot_a)
    u_odd = (length + theta_l * inv_t - cot_a * (mm + 1.0)) / (inv_t - cot_a)
    u = np.where(even, u_even, u_odd)
    return np.clip(u, mm, mm + 1.0)


def _lift_slope(theta, length, cot_a, tan_p):
    """Exact derivative of the lift away from break points."""
    theta = np.asarray(theta, float)
    u = _lift(theta, length, cot_a, tan_p)

    def dX(v):
        return np.where(np.mod(v, 2.0) < 1.0, -cot_a, cot_a)

    return (1.0 + tan_p * dX(theta)) / (1.0 - tan_p * dX(u))


class ReturnMap:
    """Return map of the sloping wall, as a circle map s -> pi(s) on [0, 1)."""

    def __init__(self, domain: TrapeziumDomain, phi: float):
        if phi >= domain.alpha - domain.critical_tol:
            raise SectionUnavailable(
                f"no slope section for phi={phi:.6g} >= alpha={domain.alpha:.6g}"
            )
        if phi <= 0:
            raise DomainError("direction angle must be positive")
        self.domain = domain
        self.phi = phi
        self._tan_p = math.tan(phi)
        self.orientation = 1

    def lift(self, theta):
        return _lift(theta, self.domain.length, self.domain.cot_alpha, self._tan_p)

    def __call__(self, s):
        out = np.mod(self.lift(2.0 * np.asarray(s, float)) / 2.0, 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, s):
        """Exact slope of the piecewise-affine map (for cross-checks)."""
        return _lift_slope(2.0 * np.asarray(s, float), self.domain.length,
                           self.domain.cot_alpha, self._tan_p)

    def check_monotone(self, n_pairs=1000, seed=0):
        """Sampled check that pi is a degree-1 monotone circle map."""
        rng = np.random.default_rng(seed)
        s = rng.random(n_pairs)
        ds = rng.random(n_pairs) * 0.5
        a = self.lift(2 * s)
        b = self.lift(2 * (s + ds))
        deg = self.lift(2 * s + 2.0) - a
        ok = bool(np.all(b >= a) and np.allclose(deg, 2.0, atol=1e-12))
        self.orientation = 1 if ok else 0
        return ok

    # physical interpretation of a circle point
    def state_at(self, s, kappa=1.0):
        theta = np.mod(2.0 * s, 2.0)
        if theta < 1.0:
            h, s3 = theta, 1
        else:
            h, s3 = 2.0 - theta, -1
        x1 = self.domain.slope_x(h)
        return RayState(x1, h, -1, s3, self.phi, kappa)

    @staticmethod
    def circle_coordinate(height, sigma3):
        theta = height if sigma3 > 0 else 2.0 - height
        return float(np.mod(theta / 2.0, 1.0))

    def fixed_points(self, q, grid=4000):
        """Roots of pi^q(s) - s on the circle, via the lift."""
        from scipy.optimize import brentq

        s = np.linspace(0.0, 1.0, grid + 1)
        theta = 2 * s
        for _ in range(q):
            theta = self.lift(theta)
        disp = (theta - 2 * s) / 2.0
        shift = np.round(np.median(disp))
        g = disp - shift
        roots = []
        for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
            def fn(x):
                th = 2 * x
                for _ in range(q):
                    th = self.lift(th)
                return float((th - 2 * x) / 2.0 - shift)

            if g[i] == 0:
                roots.append(float(s[i]))
                continue
            roots.append(brentq(fn, s[i], s[i + 1], xtol=1e-15, rtol=1e-15))
        return sorted(set(round(r, 13) for r in roots))


def return_map(domain: TrapeziumDomain, omega0: float, N: float = 1.0) -> ReturnMap:
    phi, _ = admissible_directions(omega0, N)
    return ReturnMap(domain, phi)


def trace_return(rmap: ReturnMap, s, max_bounces=200):
    """Evaluate the return map by physically tracing from the slope.

    Independent of the unfolded evaluation; fails near corners.
    """
    state = rmap.state_at(s)
    n = rmap.domain.outward_normal("slope")
    start = state.at(state.position - 1e-13 * n)
    path = trace(rmap.domain, start, max_bounces)
    for e in path.events:
        if e.wall == "slope":
            return ReturnMap.circle_coordinate(e.point[1], e.outgoing[1]), path
    raise CornerAbsorbed(f"no slope return ({path.status})")


# --- rotation number and Lyapunov exponent ----------------------------------


@dataclass(frozen=True)
class RotationEstimate:
    rho: float
    rho_2n: float
    error: float
    n: int

    @property
    def converged(self):
        return self.error < 2.0 / self.n


def _in_arc(x, c, pc):
    width = np.mod(pc - c, 1.0)
    # a width within rounding of 1 is an empty arc (pc == c up to wraparound)
    width = np.where(width > 1.0 - 1e-12, 0.0, width)
    return np.mod(x - c, 1.0) < width


def rotation_number(fmap, n, c=0.0, cprime=0.0):
    """Counting estimate (1/n) #{j < n : pi^j(c') in [c, pi(c))} at n and 2n."""
    if n < 1:
        raise DomainError("need n >= 1")
    pc = fmap(c)
    x = cprime
    count_n = 0
    count = 0
    for j in range(2 * n):
        if _in_arc(x, c, pc):
            count += 1
        if j == n - 1:
            count_n = count
        x = fmap(x)
    rho_n = count_n / n
    rho_2n = count / (2 * n)
    return RotationEstimate(rho_n, rho_2n, abs(rho_n - rho_2n), n)


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    n: int
    flagged: int


def _circ_diff(a, b):
    d = np.mod(a - b, 1.0)
    return np.where(d > 0.5, d - 1.0, d)


def lyapunov_exponent(fmap, n, s0=0.0, step=1e-6, kink_tol=1e-6):
    """Orbit average of log|pi'| with central differences.

    A sample whose one-sided quotients disagree straddles a break point;
    it is flagged and replaced by the next orbit point.
    """
    if n < 1:
        raise DomainError("need n >= 1")
    s = s0
    total = 0.0
    taken = flagged = 0
    while taken < n:
        fp = fmap(s + step)
        fm = fmap(s - step)
        f0 = fmap(s)
        right = float(_circ_diff(fp, f0)) / step
        left = float(_circ_diff(f0, fm)) / step
        if abs(right - left) > kink_tol * max(abs(right), abs(left)):
            flagged += 1
            if flagged > 10 * n:
                raise NumericalFailure("derivative undefined along most of the orbit")
        else:
            total += math.log(abs(0.5 * (right + left)))
            taken += 1
        s = f0
    return LyapunovEstimate(total / n, n, flagged)


# --- bifurcation sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    length: float = 3.0
    n_iter: int = 400
    n_transient: int = 200
    seed: int = 0
    lyapunov_tol: float = 1e-3
    workers: int = 1


@dataclass(frozen=True)
class SweepCell:
    alpha: float
    phi: float
    rho: float
    rho_err: float
    lyapunov: float
    cls: str
    message: str = ""


def _sweep_block(alphas, phis, cfg, cell_ids=None):
    """Vectorised evaluation of a list of (alpha, phi) cells.

    Starting points are drawn per cell from (seed, cell id), so the result
    does not depend on how cells are split between workers.
    """
    alphas = np.asarray(alphas, float)
    phis = np.asarray(phis, float)
    out = [None] * len(alphas)
    ok = []
    for i, (a, p) in enumerate(zip(alphas, phis)):
        if p >= a - CRITICAL_TOL:
            out[i] = SweepCell(a, p, math.nan, math.nan, math.nan, "corner")
            continue
        try:
            TrapeziumDomain(cfg.length, a)
        except DomainError as exc:
            out[i] = SweepCell(a, p, math.nan, math.nan, math.nan, "error", str(exc))
            continue
        ok.append(i)
    if not ok:
        return out
    idx = np.array(ok)
    L = np.full(len(idx), cfg.length)
    cot_a = np.cos(alphas[idx]) / np.sin(alphas[idx])
    tan_p = np.tan(phis[idx])
    ids = np.arange(len(alphas)) if cell_ids is None else np.asarray(cell_ids)
    c, cprime = np.array([np.random.default_rng([cfg.seed, int(k)]).random(2) for k in ids[idx]]).T

    def f(s):
        return np.mod(_lift(2.0 * s, L, cot_a, tan_p) / 2.0, 1.0)

    n = cfg.n_iter
    # rotation number by counting, at n and 2n
    pc = f(c)
    x = cprime.copy()
    cnt = np.zeros(len(idx))
    cnt_n = None
    for j in range(2 * n):
        cnt += _in_arc(x, c, pc)
        if j == n - 1:
            cnt_n = cnt.copy()
        x = f(x)
    rho_n = cnt_n / n
    rho_2n = cnt / (2 * n)
    # Lyapunov exponent along the orbit after a transient
    s = cprime.copy()
    for _ in range(cfg.n_transient):
        s = f(s)
    h = 1e-6
    total = np.zeros(len(idx))
    taken = np.zeros(len(idx))
    guard = 0
    while np.any(taken < n) and guard < 20 * n:
        f0, fp, fm = f(s), f(s + h), f(s - h)
        right = _circ_diff(fp, f0) / h
        left = _circ_diff(f0, fm) / h
        smooth = np.abs(right - left) <= 1e-6 * np.maximum(np.abs(right), np.abs(left))
        use = smooth & (taken < n)
        total[use] += np.log(np.abs(0.5 * (right[use] + left[use])))
        taken[use] += 1
        s = f0
        guard += 1
    lyap = total / np.maximum(taken, 1)
    for k, i in enumerate(idx):
        err = abs(rho_n[k] - rho_2n[k])
        if lyap[k] < -cfg.lyapunov_tol and err < 2.0 / n:
            cls = "attractor"
        else:
            cls = "no_pattern"
        out[i] = SweepCell(alphas[i], phis[i], float(rho_n[k]), float(err), float(lyap[k]), cls)
    return out


def bifurcation_sweep(alpha_grid, phi_grid, n_iter=None, config: SweepConfig | None = None):
    """Rotation number, Lyapunov exponent and class on an (alpha, phi) grid.

    Returns a 2D list indexed [i_alpha][i_phi].
    """
    cfg = config or SweepConfig()
    if n_iter is not None:
        cfg = replace(cfg, n_iter=int(n_iter))
    alpha_grid = np.atleast_1d(np.asarray(alpha_grid, float))
    phi_grid = np.atleast_1d(np.asarray(phi_grid, float))
    if alpha_grid.size == 0 or phi_grid.size == 0:
        raise DomainError("grids must be non-empty")
    A, P = np.meshgrid(alpha_grid, phi_grid, indexing="ij")
    a_flat, p_flat = A.ravel(), P.ravel()
    if cfg.workers > 1:
        chunks = np.array_split(np.arange(a_flat.size), cfg.workers)
        with ProcessPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(_sweep_block, [a_flat[c] for c in chunks],
                                [p_flat[c] for c in chunks], [cfg] * len(chunks), chunks))
        cells = [cell for part in parts for cell in part]
    else:
        cells = _sweep_block(a_flat, p_flat, cfg)
    na, nphi = A.shape
    return [[cells[i * nphi + j] for j in range(nphi)] for i in range(na)]


def sweep_to_csv(grid):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "phi", "rho", "rho_err", "lyapunov", "class"])
    for row in grid:
        for c in row:
            w.writerow([f"{c.alpha:.12g}", f"{c.phi:.12g}", f"{c.rho:.12g}",
                        f"{c.rho_err:.12g}", f"{c.lyapunov:.12g}", c.cls])
    return buf.getvalue()


def as_fraction(rho, max_den=12, tol=4e-3):
    frac = Fraction(rho).limit_denominator(max_den)
    return frac if abs(float(frac) - rho) <= tol else None


def detect_plateaus(grid, max_den=12, tol=4e-3):
    """Connected groups of attractor cells sharing one rational rotation number.

    ``tol`` must stay below half the gap between fractions of denominator
    at most ``max_den``.  Returns a list of (Fraction, [(i, j), ...]),
    largest first.
    """
    na, nphi = len(grid), len(grid[0])
    labels = {}
    for i in range(na):
        for j in range(nphi):
            c = grid[i][j]
            if c.cls != "attractor":
                continue
            frac = Fraction(c.rho).limit_denominator(max_den)
            if abs(float(frac) - c.rho) <= tol:
                labels[(i, j)] = frac % 1
    seen = set()
    plateaus = []
    for start, frac in labels.items():
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            i, j = stack.pop()
            comp.append((i, j))
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nb = (i + di, j + dj)
                if nb in labels and nb not in seen and labels[nb] == frac:
                    seen.add(nb)
                    stack.append(nb)
        plateaus.append((frac, sorted(comp)))
    plateaus.sort(key=lambda p: (-len(p[1]), p[0]))
    return plateaus
