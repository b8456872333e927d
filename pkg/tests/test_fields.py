import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from schauderlab.errors import InvalidArgument
from schauderlab.fields import (SpaceTimeField, constant_coefficient, cylinder_mean, discrete_lr_norm, gradient,
                                gradient_all, holder_bump, holder_seminorm, lp_mean, mollify_coefficient,
                                oscillation, slicewise_mean, steklov_average)
from schauderlab.geometry import Cylinder, Grid, Point


def field(grid, f, k=None):
    return SpaceTimeField.from_function(grid, f, k)


def test_field_rejects_non_finite(grid1d):
    with pytest.raises(InvalidArgument):
        SpaceTimeField(grid1d, np.full((grid1d.n_t, 11), np.nan))


def test_gradient_exact_on_affine_and_quadratic():
    g = Grid((-1.0, -1.0), (1.0, 1.0), (21, 21), 0.1, 0.1)
    u = field(g, lambda x, t: x[..., 0])
    assert np.allclose(gradient(u, 0)[..., 0, :], [1.0, 0.0], atol=1e-12)
    assert np.allclose(gradient(field(g, lambda x, t: 3.0 + 0 * x[..., 0]), 0), 0.0)
    q = field(g, lambda x, t: x[..., 0] ** 2)
    dq = gradient(q, 0)[1:-1, 1:-1, 0, 0]
    assert np.allclose(dq, 2 * g.coords()[1:-1, 1:-1, 0], atol=1e-12)


def test_means_examples():
    g = Grid((0.0,), (1.0,), (11,), 1.0, 0.1)
    u = field(g, lambda x, t: x[..., 0])
    everywhere = np.ones(11, dtype=bool)
    assert slicewise_mean(u, everywhere, 0)[0] == pytest.approx(0.5)
    c = field(g, lambda x, t: 2.5 + 0 * x[..., 0])
    assert slicewise_mean(c, everywhere, 3)[0] == pytest.approx(2.5)
    tt = field(g, lambda x, t: t + 0 * x[..., 0])
    assert cylinder_mean(tt, None)[0] == pytest.approx(0.5)
    g2 = Grid((-1.0,), (1.0,), (21,), 1.0, 0.1)
    odd = field(g2, lambda x, t: x[..., 0] ** 3)
    assert slicewise_mean(odd, np.ones(21, dtype=bool), 0)[0] == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(InvalidArgument):
        slicewise_mean(u, np.zeros(11, dtype=bool), 0)


def test_cylinder_mean_time_odd_vanishes():
    g = Grid((0.0,), (1.0,), (11,), 1.0, 0.1)
    u = field(g, lambda x, t: (t - 0.5) + 0 * x[..., 0])
    assert cylinder_mean(u, None)[0] == pytest.approx(0.0, abs=1e-14)


def test_oscillation_examples():
    g = Grid((0.0,), (1.0,), (11,), 1.0, 0.1)
    assert oscillation(field(g, lambda x, t: 0 * x[..., 0] + 1.0)) == 0.0
    assert oscillation(field(g, lambda x, t: 3 * x[..., 0] - 1)) == pytest.approx(3.0)
    two = field(g, lambda x, t: np.stack([x[..., 0], 0 * x[..., 0]], -1))
    assert oscillation(two) == pytest.approx(1.0)


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)), min_size=2, max_size=90))
def test_oscillation_matches_brute_force(rows):
    vals = np.array(rows)
    from schauderlab.fields import diameter
    brute = max(np.linalg.norm(a - b) for a in vals for b in vals)
    assert diameter(vals) == pytest.approx(brute, rel=1e-12, abs=1e-12)


def test_lp_mean_examples():
    g = Grid((0.0,), (1.0,), (11,), 1.0, 0.1)
    assert lp_mean(field(g, lambda x, t: 0 * x[..., 0] - 2.0), None, 3.0) == pytest.approx(8.0)
    assert lp_mean(field(g, lambda x, t: x[..., 0]), None, 1.0) == pytest.approx(0.5)
    u = field(g, lambda x, t: np.sin(5 * x[..., 0] + t))
    assert lp_mean(u, None, 2.0) == pytest.approx(float((u.values ** 2).mean()))


def test_steklov_examples():
    g = Grid((0.0,), (1.0,), (9,), 1.0, 0.05)
    h = 0.2
    c = steklov_average(field(g, lambda x, t: 0 * x[..., 0] + 4.0), h)
    valid = g.times() <= g.t_end - h + 1e-12
    assert np.allclose(c.values[valid], 4.0)
    assert np.all(c.values[~valid] == 0.0)
    lin = steklov_average(field(g, lambda x, t: t + 0 * x[..., 0]), h)
    assert np.allclose(lin.values[valid, :, 0], (g.times()[valid] + h / 2)[:, None])
    with pytest.raises(InvalidArgument):
        steklov_average(lin, 1.5)


@given(st.floats(0.02, 0.9), st.sampled_from([1.0, 2.0, 1.5, 3.0]), st.integers(0, 1000))
def test_steklov_contraction(h, r, seed):
    g = Grid((0.0,), (1.0,), (9,), 1.0, 0.05)
    vals = np.random.default_rng(seed).normal(size=(g.n_t, 9, 1))
    u = SpaceTimeField(g, vals)
    assert discrete_lr_norm(steklov_average(u, h), r) <= discrete_lr_norm(u, r) * (1 + 1e-12)


@given(st.floats(0.05, 0.5))
def test_steklov_commutes_with_gradient(h):
    g = Grid((0.0, 0.0), (1.0, 1.0), (9, 9), 1.0, 0.05)
    u = field(g, lambda x, t: np.sin(3 * x[..., 0] + t) * x[..., 1] ** 2 + t * t)
    lhs = gradient_all(steklov_average(u, h))
    grads = SpaceTimeField(g, gradient_all(u).reshape(g.n_t, 9, 9, -1))
    rhs = steklov_average(grads, h).values.reshape(lhs.shape)
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_steklov_converges_linearly():
    g = Grid((0.0,), (1.0,), (9,), 1.0, 1.0 / 1024)
    u = field(g, lambda x, t: np.sin(3 * t + x[..., 0]))
    hs = [0.2 / 2 ** i for i in range(5)]
    errs = []
    for h in hs:
        s = steklov_average(u, h)
        valid = g.times() < 0.7
        errs.append(np.abs(s.values[valid] - u.values[valid]).max())
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 0.9


def test_holder_seminorm_examples():
    g = Grid((0.0,), (1.0,), (11,), 1.0, 0.1)
    assert holder_seminorm(field(g, lambda x, t: 0 * x[..., 0] + 1), 0.5) == 0.0
    u = field(g, lambda x, t: x[..., 0])
    assert holder_seminorm(u, 1.0) == pytest.approx(1.0)
    assert holder_seminorm(u.scaled(2.0), 0.5) == pytest.approx(2 * holder_seminorm(u, 0.5))


def test_constant_coefficient_bounds(grid2d):
    a = constant_coefficient(1.7)
    assert np.allclose(a(grid2d.coords(), 0.0), 1.7)
    assert a.check_bounds(grid2d)["ok"]


def test_holder_bump_declared_bounds(grid2d):
    a = holder_bump(0.5, (0.0, 0.0), 0.5, (grid2d.lower, grid2d.upper))
    assert a.check_bounds(grid2d)["ok"]
    with pytest.raises(InvalidArgument):
        a(np.array([[3.0, 0.0]]), 0.0)


def test_mollified_constant_is_constant():
    a = constant_coefficient(2.0)
    m = mollify_coefficient(a, 0.1, dim=2)
    pts = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    assert np.allclose(m(pts, 0.0), 2.0, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("eps", [0.1, 0.05, 0.025])
def test_mollification_properties(alpha, eps):
    dom = ((-1.0, -1.0), (1.0, 1.0))
    a = holder_bump(alpha, (0.1, -0.2), 0.5, dom)
    m = mollify_coefficient(a, eps)
    g = Grid((-0.8, -0.8), (0.8, 0.8), (17, 17), 0.1, 0.1)
    x = g.coords()
    am, a0 = m(x, 0.0), a(x, 0.0)
    assert (am >= a.C_o - 1e-12).all() and (am <= a.C_1 + 1e-12).all()
    assert (np.abs(am - a0) <= a.C_1 * eps ** alpha).all()


def test_mollify_rejects_large_eps():
    a = holder_bump(0.5, (0.0,), 0.5, ((-0.1,), (0.1,)))
    with pytest.raises(InvalidArgument):
        mollify_coefficient(a, 0.2)
