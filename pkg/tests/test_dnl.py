import math

import numpy as np
import pytest
import sympy as sy
from hypothesis import given
from hypothesis import strategies as st

from schauderlab.discrete import Discretization, SolverParams
from schauderlab.dnl import (DNLProblem, critical_exponent, detect_extinction, dnl_weak_residual,
                             explicit_borderline, explicit_critical, extinction_bounds, grad_norm_power,
                             lambda_q1, lq_envelope, lq_norm_power, envelope_rate, rescale, sobolev_constant,
                             solve_dnl, to_coefficient_form, ExtinctionRecord)
from schauderlab.errors import InvalidArgument
from schauderlab.fields import SpaceTimeField
from schauderlab.geometry import Grid, Point

# ----------------------------------------------------------------------------
# closed-form solutions checked by symbolic substitution


def _radial_residual(u, r, t, N, p, q):
    """d_t u^q - r^(1-N) d_r(r^(N-1) |u_r|^(p-2) u_r) for radially decreasing u."""
    ur = sy.diff(u, r)
    flux = -(-ur) ** (p - 1)
    return sy.diff(u ** q, t) - sy.diff(r ** (N - 1) * flux, r) / r ** (N - 1)


@pytest.mark.parametrize("N,p", [(2, sy.Rational(3, 2)), (3, sy.Rational(3, 2)), (3, 2), (2, sy.Rational(5, 4)),
                                 (4, 3)])
def test_critical_rate_by_substitution(N, p):
    r, t = sy.symbols("r t", positive=True)
    q = N * (p - 1) / (N - p)
    b_ok = (q + 1) / (N - 1) * (N / q) ** p
    profile = lambda b: (r ** (N * (q + 1) / (q * (N - 1))) + sy.exp(b * t)) ** (-(N - 1) / (q + 1))
    sol = explicit_critical(N, float(p))
    assert sol.b == pytest.approx(float(b_ok))
    for rv, tv in [(0.3, 0.1), (1.2, -0.4), (2.0, 0.7)]:
        res = _radial_residual(profile(b_ok), r, t, N, p, q).subs({r: rv, t: tv})
        assert abs(float(res)) < 1e-10
    if p != q:
        b_quoted = (N / q) ** q
        res = _radial_residual(profile(b_quoted), r, t, N, p, q).subs({r: 0.7, t: 0.2})
        assert abs(float(res)) > 1e-3


@pytest.mark.parametrize("N,p", [(1, sy.Integer(3)), (2, sy.Rational(3, 2)), (3, sy.Integer(2))])
def test_borderline_by_substitution(N, p):
    r, t = sy.symbols("r t", positive=True)
    u = t ** (-N / (p * (p - 1))) * sy.exp(-(p - 1) / p * (r ** p / (p * t)) ** (1 / (p - 1)))
    for rv, tv in [(0.4, 0.3), (1.1, 2.0)]:
        res = _radial_residual(u, r, t, N, p, p - 1).subs({r: rv, t: tv})
        assert abs(float(res)) < 1e-10


def test_critical_examples():
    sol = explicit_critical(2, 1.5)
    assert sol.q == pytest.approx(2.0) and sol.b == pytest.approx(3.0)
    v, g = sol(np.array([0.0, 0.0]), 0.0)
    assert v == pytest.approx(1.0) and g == 0.0
    _, g1 = sol(np.array([1.0, 0.0]), 0.0)
    assert g1 == pytest.approx(2 ** (-4 / 3))
    x = np.array([0.3, -0.4])
    assert sol.value(x, 0.2) == pytest.approx((0.5 ** 3 + math.exp(0.6)) ** (-1 / 3))
    with pytest.raises(InvalidArgument):
        explicit_critical(2, 2.0)


def test_critical_gradient_matches_finite_differences():
    sol = explicit_critical(2, 1.5)
    x = np.array([0.31, -0.22])
    h = 1e-6
    fd = np.array([(sol.value(x + h * e, 0.1) - sol.value(x - h * e, 0.1)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(sol.gradient(x, 0.1), fd, atol=1e-8)


def test_borderline_examples():
    rng = np.random.default_rng(7)
    x = rng.uniform(-2, 2, (100, 2))
    t = rng.uniform(0.1, 3, 100)
    u = explicit_borderline(1.0, 2, 2.0)
    heat = np.exp(-(x ** 2).sum(-1) / (4 * t)) / t
    assert np.abs(u(x, t) - heat).max() <= 1e-12
    assert explicit_borderline(2.5, 2, 3.0)(np.zeros(2), 2.0) == pytest.approx(2.5 * 2.0 ** (-2 / 6))
    assert np.allclose(explicit_borderline(3.0, 2, 3.0)(x, t), 3 * explicit_borderline(1.0, 2, 3.0)(x, t))
    with pytest.raises(InvalidArgument):
        u(np.zeros(2), 0.0)


# ----------------------------------------------------------------------------
# solver


def test_problem_validation():
    g = Grid((0.0,), (1.0,), (11,), 0.1, 0.01)
    with pytest.raises(InvalidArgument):
        DNLProblem(2.0, 0.5, g, lambda x: x[..., :1])
    with pytest.raises(InvalidArgument):
        DNLProblem(2.0, 2.0, g, lambda x: x[..., :1] - 0.5)
    pb = DNLProblem(1.5, 2.0, Grid((0.0, 0.0), (1.0, 1.0), (9, 9), 0.1, 0.01), lambda x: 1 + 0 * x[..., :1])
    assert pb.supercritical is False and pb.N == 2
    assert DNLProblem(1.5, 1.0, pb.grid, pb.initial).supercritical
    assert critical_exponent(2, 1.5) == pytest.approx(2.0)


def test_zero_data_stays_zero():
    g = Grid((0.0, 0.0), (1.0, 1.0), (9, 9), 0.1, 0.01)
    u = solve_dnl(DNLProblem(1.5, 2.0, g, np.zeros(g.shape)))
    assert not u.values.any()


def test_heat_reduction():
    g = Grid((0.0,), (np.pi,), (256,), 0.5, 1e-4)
    exact = lambda x, t: (np.exp(-t) * np.sin(x[..., 0]))[..., None]
    u = solve_dnl(DNLProblem(2.0, 1.0, g, lambda x: exact(x, 0.0), exact))
    ref = SpaceTimeField.from_function(g, exact)
    assert np.abs(u.values - ref.values).max() <= 1e-3


def test_critical_oracle_coarse():
    sol = explicit_critical(2, 1.5)
    ex = lambda x, t: sol.value(x, t)[..., None]
    g = Grid((-0.5, -0.5), (0.5, 0.5), (33, 33), 0.05, 1e-3)
    u = solve_dnl(DNLProblem(1.5, 2.0, g, lambda x: ex(x, 0.0), ex))
    ref = SpaceTimeField.from_function(g, ex)
    assert np.abs(u.values - ref.values).max() / np.abs(ref.values).max() <= 0.02


@given(st.integers(0, 10 ** 6), st.floats(0.0, 0.5))
def test_order_preservation(seed, shift):
    g = Grid((0.0,), (1.0,), (17,), 0.05, 0.005)
    rng = np.random.default_rng(seed)
    lo = np.abs(rng.normal(size=g.shape)) * np.sin(np.pi * g.coords()[..., 0])
    hi = lo + shift + np.abs(rng.normal(size=g.shape)) * 0.3
    hi[[0, -1]] = lo[[0, -1]] + shift
    u = solve_dnl(DNLProblem(2.0, 2.0, g, lo))
    v = solve_dnl(DNLProblem(2.0, 2.0, g, hi))
    assert (u.values <= v.values + 1e-9).all()


@given(st.sampled_from([(2.0, 2.0), (1.5, 1.0), (2.5, 2.0)]), st.integers(0, 10 ** 6))
def test_norm_decay_with_zero_data(pq, seed):
    p, q = pq
    g = Grid((0.0,), (1.0,), (33,), 0.1, 0.005)
    u0 = np.abs(np.random.default_rng(seed).normal(size=g.shape))
    u0[[0, -1]] = 0.0
    u = solve_dnl(DNLProblem(p, q, g, u0))
    disc = Discretization(g)
    norms = np.array([lq_norm_power(u.values[j], disc, q + 1) for j in range(g.n_t)])
    assert (np.diff(norms) <= 1e-12 * norms[0]).all()


def _exact_field(g, f):
    return SpaceTimeField.from_function(g, lambda x, t: f(x, t)[..., None])


def _zeta(g):
    lo, hi = np.asarray(g.lower), np.asarray(g.upper)
    return SpaceTimeField.from_function(
        g, lambda x, t: (np.prod(np.sin(np.pi * (x - lo) / (hi - lo)), -1) * (g.t_end - t))[..., None])


def test_explicit_solutions_weak_residual_converges():
    sol = explicit_critical(2, 1.5)
    bord = explicit_borderline(1.0, 1, 3.0)
    cases = [
        (lambda m: Grid((-0.5, -0.5), (0.5, 0.5), (8 * m + 1,) * 2, 0.2, 0.04 / m), sol.value, 1.5, 2.0),
        (lambda m: Grid((-1.0,), (1.0,), (32 * m + 1,), 1.5, 0.1 / m, 0.5), bord, 3.0, 2.0),
    ]
    for make, f, p, q in cases:
        dts, res = [], []
        for m in (1, 2, 4, 8):
            g = make(m)
            dts.append(g.dt)
            res.append(abs(dnl_weak_residual(_exact_field(g, f), p, q, _zeta(g))))
        assert np.polyfit(np.log(dts), np.log(res), 1)[0] >= 0.9


# ----------------------------------------------------------------------------
# rescaling and substitution


def test_rescale_examples():
    g = Grid((-1.0, -1.0), (1.0, 1.0), (21, 21), 1.0, 0.05, -1.0)
    const = SpaceTimeField(g, np.full((g.n_t, 21, 21, 1), 3.0))
    z = Point((0.0, 0.0), 0.0)
    assert np.allclose(rescale(const, z, 0.5, 3.0, 2.0, 1.1).values, 1.0)
    smooth = SpaceTimeField.from_function(g, lambda x, t: (2 + x[..., 0] + 0.5 * t * x[..., 1])[..., None])
    ident = rescale(smooth, z, 1.0, 1.0, 1.5, 2.0, n=21, n_t=g.n_t)
    assert np.abs(ident.values - smooth.values).max() <= 1e-12
    u0 = float(smooth.values[g.time_index(0.0)][10, 10, 0])
    r = rescale(smooth, z, 0.4, u0, 1.5, 2.0, n=9, n_t=9)
    assert r.values[4, 4, 4, 0] == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        rescale(smooth, z, 1.5, 0.1, 1.5, 2.0)


def test_to_coefficient_form():
    g = Grid((-1.0,), (1.0,), (11,), 1.0, 0.25, -1.0)
    ones = SpaceTimeField(g, np.ones((g.n_t, 11, 1)))
    v, a = to_coefficient_form(ones, 1.5, 2.0)
    assert np.allclose(v.values, 1.0)
    assert np.allclose(a(g.coords(), 0.0), 0.5 ** 0.5)
    wiggly = SpaceTimeField.from_function(g, lambda x, t: (1.5 + 0.8 * np.sin(3 * x[..., 0] + t))[..., None])
    for q in (1.0, 2.0, 3.5):
        p = 1.8
        v, a = to_coefficient_form(wiggly, p, q)
        k = v.meta["k_bound"]
        base = (1 / q) ** (p - 1)
        lo, hi = base * k ** (-(p - 1) * abs(1 - q)), base * k ** ((p - 1) * abs(1 - q))
        nodal = v.meta["a_nodal"]
        assert (nodal >= lo * (1 - 1e-12)).all() and (nodal <= hi * (1 + 1e-12)).all()
        assert a.C_o == pytest.approx(lo) and a.C_1 == pytest.approx(hi)
        if q == 1.0:
            assert np.allclose(nodal, base)
    with pytest.raises(InvalidArgument):
        to_coefficient_form(SpaceTimeField(g, np.zeros((g.n_t, 11, 1))), 1.5, 2.0)


# ----------------------------------------------------------------------------
# extinction


def test_extinction_bound_examples():
    assert lambda_q1(2, 2.0, 2.0) == pytest.approx(4.0)
    rec = extinction_bounds(1.0, 1.0, 1.0, 2, 2.0, 2.0, 1.0)
    assert rec.lambda_q1 == 4.0
    r2 = extinction_bounds(2.0, 1.0, 1.0, 2, 2.0, 2.0, 1.0)
    assert r2.T_upper / rec.T_upper == pytest.approx(2 ** (4 / 6))
    with pytest.raises(InvalidArgument):
        extinction_bounds(1.0, 1.0, 1.0, 1, 2.0, 1.0, 0.5)
    with pytest.raises(InvalidArgument):
        ExtinctionRecord(1.0, 2.0, 0.5, 1.0)


def _sine_norms(c, p, q):
    """Exact norms of ``c sin(pi x)`` on (0, 1)."""
    from scipy.integrate import quad
    n1 = (quad(lambda x: abs(c * math.sin(math.pi * x)) ** (q + 1), 0, 1)[0]) ** (1 / (q + 1))
    n2 = (quad(lambda x: abs(c * math.pi * math.cos(math.pi * x)) ** p, 0, 1)[0]) ** (1 / p)
    return n1, n2


@given(st.floats(0.1, 10), st.floats(0.1, 5), st.floats(1.2, 3.0), st.floats(0.05, 2.0))
def test_extinction_homogeneity(c, s, p, gap):
    q = p - 1 + gap
    a = extinction_bounds(1.0, *_sine_norms(c, p, q), 1, p, q, 0.5)
    b = extinction_bounds(1.0, *_sine_norms(s * c, p, q), 1, p, q, 0.5)
    assert b.T_upper / a.T_upper == pytest.approx(s ** (q + 1 - p), rel=1e-8)
    assert b.T_lower / a.T_lower == pytest.approx(s ** (q + 1 - p), rel=1e-6)
    assert a.T_lower <= a.T_upper


def test_lq_envelope_examples():
    p, q, v0, rate = 2.0, 2.0, 0.7, 1.9
    assert lq_envelope(0.0, v0, rate, p, q) == pytest.approx(v0)
    T = (q + 1) * v0 ** ((q + 1 - p) / (q + 1)) / (rate * (q + 1 - p))
    assert lq_envelope(T * (1 - 1e-9), v0, rate, p, q) > 0
    assert lq_envelope(T, v0, rate, p, q) == 0.0
    assert np.all(lq_envelope(np.linspace(0, 5, 7), 0.0, rate, p, q) == 0)
    rec = extinction_bounds(1.0, v0 ** (1 / 3), 50.0, 1, p, q, 0.5)
    T_env = (q + 1) * v0 ** ((q + 1 - p) / (q + 1)) / (envelope_rate(0.5, 1.0, 1, p, q) * (q + 1 - p))
    assert T_env == pytest.approx(rec.T_upper)


def test_detect_extinction_examples():
    g = Grid((0.0,), (1.0,), (11,), 1.0, 0.1)
    assert detect_extinction(SpaceTimeField(g, np.zeros((g.n_t, 11)))) == 0.0
    assert detect_extinction(SpaceTimeField(g, np.full((g.n_t, 11), 2.0))) is None
    decay = SpaceTimeField.from_function(g, lambda x, t: np.maximum(0.45 - t, 0) + 0 * x[..., 0])
    assert detect_extinction(decay, tol=0.05) == pytest.approx(0.4)


def _random_w0(g, seed):
    rng = np.random.default_rng(seed)
    x = g.coords()
    lo, hi = np.asarray(g.lower), np.asarray(g.upper)
    s = (x - lo) / (hi - lo)
    out = np.zeros(g.shape)
    for _ in range(4):
        freq = rng.integers(1, 5, size=g.d)
        out += rng.normal() * np.prod(np.sin(np.pi * freq * s), -1)
    return np.abs(out) ** rng.uniform(1.0, 2.0)


@given(st.integers(0, 10 ** 6), st.sampled_from([(1, 2.0, 2.0), (1, 1.5, 1.0), (2, 2.0, 2.0), (2, 1.5, 1.0),
                                                  (2, 1.8, 1.5)]))
def test_sobolev_constant_is_valid(seed, npq):
    N, p, q = npq
    g = Grid((0.0,) * N, (1.3,) * N, (161 if N == 1 else 65,) * N, 1.0, 1.0)
    u = _random_w0(g, seed)
    disc = Discretization(g)
    lhs = lq_norm_power(u, disc, q + 1) ** (1 / (q + 1))
    grad = grad_norm_power(u, disc, p) ** (1 / p)
    measure = 1.3 ** N
    C = sobolev_constant(N, p, q)
    assert lhs <= C * measure ** (lambda_q1(N, p, q) / (N * p * (q + 1))) * grad * 1.02
