import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractorlab import hamflow
from attractorlab.errors import BlowUp, DomainError, EmptyShell, InvalidBump
from attractorlab.hamflow import (
    Bump,
    PhasePoint,
    Symbol,
    ToyModelState,
    flow_integrate,
    internal_wave_symbol,
    local_escape,
    poisson_bracket,
    toy_flow_exact,
    toy_poincare,
    toy_symbol,
)


def modulated_symbol():
    """A degree-0 symbol with genuine x dependence, gradient by differences."""
    return Symbol(lambda x, p: np.abs(p[..., 0]) / np.hypot(p[..., 0], p[..., 1])
                  * (1 + 0.3 * np.sin(x[..., 0]) * np.cos(x[..., 1])), degree=0)


# --- symbols --------------------------------------------------------------------------


def test_internal_wave_values():
    h = internal_wave_symbol(2.0)
    assert h((0, 0), (1, 0)) == pytest.approx(2.0)
    assert h((0, 0), (1, 1)) == pytest.approx(2 / math.sqrt(2))
    _, dp = internal_wave_symbol(1.0).gradient((0, 0), (1, 1))
    assert dp[0] == pytest.approx(2 ** -1.5, abs=1e-12)
    _, dp_fd = internal_wave_symbol(1.0).with_fd_gradient().gradient((0, 0), (1, 1))
    np.testing.assert_allclose(dp_fd, dp, atol=1e-8)
    with pytest.raises(DomainError):
        h((0, 0), (0, 0))
    with pytest.raises(DomainError):
        internal_wave_symbol(0.0)
    with pytest.raises(DomainError):
        PhasePoint((0, 0), (0, 0))


@settings(max_examples=60, deadline=None)
@given(p1=st.floats(-5, 5), p2=st.floats(-5, 5), y=st.floats(-0.9, 0.9), lam=st.sampled_from([2.0, 10.0, 100.0]))
def test_homogeneity_tags(p1, p2, y, lam):
    if math.hypot(p1, p2) < 1e-3 or abs(p2) < 1e-3:
        return
    x, p = np.array([0.3, y]), np.array([p1, p2])
    for h in (internal_wave_symbol(1.3), toy_symbol(0.7), modulated_symbol()):
        assert h(x, lam * p) == pytest.approx(h(x, p), abs=1e-10)
    d = local_escape(0.7, 0.5)
    assert d(x, lam * p) == pytest.approx(lam * d(x, p), rel=1e-10, abs=1e-10)


def test_fd_gradient_matches_analytic():
    rng = np.random.default_rng(0)
    for h in (toy_symbol(0.8), hamflow.cycle_pair_symbol(0.6), internal_wave_symbol(1.0)):
        for _ in range(10):
            x, p = rng.normal(size=2), rng.normal(size=2) + np.array([0, 3])
            a = h.gradient(x, p)
            b = h.with_fd_gradient().gradient(x, p)
            np.testing.assert_allclose(b[0], a[0], atol=1e-7)
            np.testing.assert_allclose(b[1], a[1], atol=1e-7)


# --- numerical flow --------------------------------------------------------------


def test_internal_wave_flow_is_straight():
    tr = flow_integrate(internal_wave_symbol(1.0), PhasePoint((0.1, 0.2), (1.0, 1.0)), 5.0, 1e-2)
    assert np.max(np.abs(tr.p - np.array([1.0, 1.0]))) < 1e-10
    # group velocity dx1/dt = p3^2/|p|^3
    assert tr.x[-1, 0] - 0.1 == pytest.approx(5.0 * 2 ** -1.5, rel=1e-10)


def test_energy_conservation():
    tr = flow_integrate(modulated_symbol(), ((0.1, 0.2), (1.0, 0.5)), 10.0, 1e-3, sample_every=100)
    assert np.max(np.abs(tr.h - tr.h[0])) < 1e-8


def test_degree_zero_time_scaling():
    h = modulated_symbol()
    a = flow_integrate(h, ((0.1, 0.2), (1.0, 0.5)), 2.0, 1e-3)
    b = flow_integrate(h, ((0.1, 0.2), (2.0, 1.0)), 4.0, 2e-3)
    np.testing.assert_allclose(b.x, a.x, atol=1e-8)
    np.testing.assert_allclose(b.p, 2 * a.p, atol=1e-8)


def test_flow_errors_and_csv():
    with pytest.raises(BlowUp):
        flow_integrate(toy_symbol(1.0), ((0, 0), (0.0, 1.0)), 20.0, 1e-2, p_bounds=(1e-8, 10.0))
    with pytest.raises(DomainError):
        flow_integrate(toy_symbol(1.0), ((0, 0), (0.0, 1.0)), 1.0, 0.0)
    tr = flow_integrate(toy_symbol(1.0), ((0, 0), (0.0, 1.0)), 0.1, 1e-2)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x1,x2,p1,p2,h"
    assert len(lines) == 12


# --- exact toy flow -----------------------------------------------------------------


def test_toy_flow_examples():
    z = toy_flow_exact(1.0, ToyModelState(0.0, 1.0, 1.0, 1.0), math.e - 1, period=math.inf)
    assert z.x == pytest.approx(1.0, abs=1e-14)
    assert z.eta == pytest.approx(math.e, abs=1e-14)
    assert z.y == pytest.approx(1 / math.e, abs=1e-14)
    z = toy_flow_exact(0.5, ToyModelState(0.2, 0.0, 0.0, 2.0), 3.0, period=math.inf)
    assert z.y == 0.0
    assert z.x == pytest.approx(0.2 + 2 * math.log(1 + 0.5 * 3 / 2))
    with pytest.raises(DomainError):
        toy_flow_exact(-1.0, ToyModelState(0, 0, 0, 1.0), 2.0)


@settings(max_examples=80, deadline=None)
@given(lam=st.floats(0.1, 3), y=st.floats(-2, 2), xi=st.floats(-2, 2), eta=st.floats(0.1, 5), t=st.floats(0, 20))
def test_toy_first_integrals(lam, y, xi, eta, t):
    z0 = ToyModelState(0.0, y, xi, eta)
    z = toy_flow_exact(lam, z0, t)
    assert z.xi == xi
    h0 = lambda s: s.xi / s.eta - lam * s.y
    assert h0(z) == pytest.approx(h0(z0), abs=1e-12 * (1 + abs(xi / eta) + lam * abs(y)))
    assert z.eta > 0
    assert 0 <= z.x < 1


def test_toy_flow_matches_integrator():
    lam = 0.8
    z0 = ToyModelState(0.1, 0.3, 0.5, 1.2)
    tr = flow_integrate(toy_symbol(lam), ((z0.x, z0.y), (z0.xi, z0.eta)), 10.0, 1e-3, sample_every=1000)
    for t, x, p in zip(tr.t, tr.x, tr.p):
        z = toy_flow_exact(lam, z0, t, period=math.inf)
        np.testing.assert_allclose([z.x, z.y, z.xi, z.eta], [*x, *p], atol=1e-8)


def test_spiral_law_on_stable_cone():
    lam, y0, eta0 = 0.9, 0.4, 1.5
    z0 = ToyModelState(0.0, y0, lam * y0 * eta0, eta0)
    for t in (0.5, 2.0, 7.0):
        z = toy_flow_exact(lam, z0, t, period=math.inf)
        assert z.y == pytest.approx(y0 * math.exp(-lam * z.x), abs=1e-8)
        assert z.eta == pytest.approx(eta0 * math.exp(lam * z.x), abs=1e-8)


def test_toy_poincare():
    y, eta = toy_poincare(math.log(2), 1.0, 1.0)
    assert (y, eta) == pytest.approx((0.5, 2.0), abs=1e-15)
    assert toy_poincare(0.37, 0.0, 3.0) == pytest.approx((0.0, 3 * math.exp(0.37)))
    # one turn of the exact flow lands on the same section values
    lam, y0, eta0 = 0.6, 0.25, 1.0
    z0 = ToyModelState(0.0, y0, lam * y0 * eta0, eta0)
    t_turn = eta0 * (math.exp(lam) - 1) / lam
    z = toy_flow_exact(lam, z0, t_turn, period=math.inf)
    assert (z.y, z.eta) == pytest.approx(toy_poincare(lam, y0, eta0), abs=1e-13)
    yn, en = y0, eta0
    for _ in range(5):
        yn, en = toy_poincare(lam, yn, en)
    assert (yn, en) == pytest.approx((math.exp(-5 * lam) * y0, math.exp(5 * lam) * eta0))
    with pytest.raises(DomainError):
        toy_poincare(1.0, 0.1, -1.0)


# --- brackets and escape functions --------------------------------------------------


def test_bracket_antisymmetry():
    rng = np.random.default_rng(4)
    f, g = modulated_symbol(), toy_symbol(0.5)
    for _ in range(10):
        x, p = rng.normal(size=2), rng.normal(size=2) + [0, 2]
        assert abs(poisson_bracket(f, f, x, p)) < 1e-12
        assert poisson_bracket(f, g, x, p) == pytest.approx(-poisson_bracket(g, f, x, p), abs=1e-12)


def test_bracket_is_time_derivative_along_flow():
    h, d = toy_symbol(0.7), local_escape(0.7, 0.5)
    dt = 1e-3
    tr = flow_integrate(h, ((0.0, 0.45), (0.2, 1.0)), 0.5, dt)
    dd = np.gradient(d(tr.x, tr.p), dt)
    br = poisson_bracket(h, d, tr.x, tr.p)
    assert np.max(np.abs(dd[1:-1] - br[1:-1])) < 1e-6


def test_bump_properties():
    b = Bump(0.5)
    y = np.linspace(-2, 2, 4001)
    v = b(y)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[np.abs(y) <= 0.5] == 1.0)
    assert np.all(v[np.abs(y) >= b.support] == 0.0)
    assert np.all(y * b.derivative(y) <= 0)
    fd = (b(y + 1e-6) - b(y - 1e-6)) / 2e-6
    assert np.max(np.abs(fd - b.derivative(y))) < 1e-8
    with pytest.raises(InvalidBump):
        Bump(0.0)


def test_invalid_bump_rejected():
    class Rising(Bump):
        def __call__(self, y):
            return np.clip(np.abs(y), 0, 1)

        def derivative(self, y):
            return np.sign(y) * (np.abs(y) < 1)

    with pytest.raises(InvalidBump):
        local_escape(1.0, bump=Rising(0.5))


def test_local_escape_values():
    d = local_escape(1.0, 0.5)
    assert d((0.0, 0.0), (0.3, 2.0)) == pytest.approx(2.0)
    assert d((0.0, 0.7), (0.3, 6.0)) == pytest.approx(3 * d((0.0, 0.7), (0.3, 2.0)))


@pytest.mark.parametrize("lam", [0.7, -0.7, 1.3])
def test_local_escape_bracket_on_shell(lam):
    h, d = toy_symbol(lam), local_escape(lam, 0.5)
    y = np.linspace(-1.2, 1.2, 241)
    eta = np.full_like(y, 1.7)
    x = np.stack([np.zeros_like(y), y], -1)
    p = np.stack([lam * y * eta, eta], -1)  # h0 = 0
    br = poisson_bracket(h, d, x, p)
    np.testing.assert_allclose(br, d.predicted_bracket(y), atol=1e-8)
    assert np.all(br >= -1e-14)
    assert np.all(br[np.abs(y) <= 0.5] == pytest.approx(lam**2))


def test_conjugated_bracket_lower_bound():
    lam = 0.6
    phi = Symbol(lambda x, p: 1.5 + 0.5 * np.cos(x[..., 0]), degree=0)
    h = hamflow.conjugated_toy_symbol(lam, phi)
    d = local_escape(lam, 0.5)
    rng = np.random.default_rng(7)
    y = rng.uniform(-1.2, 1.2, 500)
    x = np.stack([rng.uniform(0, 2 * np.pi, 500), y], -1)
    eta = rng.uniform(0.5, 3, 500)
    p = np.stack([lam * y * eta, eta], -1)
    br = poisson_bracket(h, d, x, p)
    assert np.all(br >= -1e-12)
    assert np.all(br[np.abs(y) <= 0.5] >= lam**2 * 1.0**2 - 1e-12)


def test_cycle_pair_escape_positive():
    lam = 0.7
    h = hamflow.cycle_pair_symbol(lam)
    d = hamflow.cycle_pair_escape(lam, 1.0)
    g = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    X1, Y = np.meshgrid(g, g + 1e-3)
    pos = np.stack([X1.ravel(), Y.ravel()], -1)
    samples = hamflow.shell_points(h, 0.0, pos)
    assert np.max(np.abs(h(*samples))) < 1e-10
    rep = hamflow.escape_positivity(h, d, samples)
    assert rep.n_samples >= 10_000
    assert rep.positive and rep.min_bracket >= lam**2 - 1e-12
    np.testing.assert_allclose(poisson_bracket(h, d, *samples), d.predicted_bracket(samples[0][:, 1]), atol=1e-10)
    doubled = hamflow.escape_positivity(h, d * 2.0, samples)
    assert doubled.min_bracket == pytest.approx(2 * rep.min_bracket, rel=1e-12)
    data = json.loads(rep.to_json())
    assert set(data) == {"min_bracket", "argmin", "n_samples"}


def test_constant_field_is_not_escape():
    h = toy_symbol(0.7)
    const = Symbol(lambda x, p: np.zeros(x.shape[:-1]), degree=1)
    pos = np.stack([np.zeros(20), np.linspace(-1, 1, 20)], -1)
    rep = hamflow.escape_positivity(h, const, hamflow.shell_points(h, 0.0, pos))
    assert not rep.positive


def test_empty_shell():
    h = toy_symbol(0.7)
    with pytest.raises(EmptyShell):
        hamflow.shell_points(internal_wave_symbol(1.0), 2.0, [[0.0, 0.0]])
    with pytest.raises(EmptyShell):
        hamflow.escape_positivity(h, local_escape(0.7), (np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]])))
