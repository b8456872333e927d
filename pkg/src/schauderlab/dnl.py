"""Doubly non-linear fast diffusion ``d_t u^q - div(|grad u|^(p-2) grad u) = 0``.

Solver, the rescaling that turns a solution into a p-Laplace solution with
bounded measurable coefficient, closed-form solutions, and extinction-time
bounds for the Cauchy-Dirichlet problem with zero lateral data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from .discrete import Discretization, ImplicitStepper, SolverParams
from .errors import InvalidArgument
from .fields import CoefficientField, SpaceTimeField
from .geometry import Grid, Point, dnl_intrinsic_cylinder


def critical_exponent(N: int, p: float) -> float:
    """``N(p-1)/(N-p)_+`` (infinite when ``p >= N``)."""
    return math.inf if N <= p else N * (p - 1.0) / (N - p)


def extinction_exponent_limit(N: int, p: float) -> float:
    """Upper end ``(N(p-1)+p)/(N-p)_+`` of the range for the extinction estimate."""
    return math.inf if N <= p else (N * (p - 1.0) + p) / (N - p)


@dataclass(frozen=True, eq=False)
class DNLProblem:
    """Non-negative Cauchy-Dirichlet problem for the doubly non-linear equation.

    Data conventions follow :class:`~schauderlab.plaplace.PLaplaceProblem`
    with ``k = 1``.
    """

    p: float
    q: float
    grid: Grid
    initial: object
    boundary: object = None
    free_mask: np.ndarray | None = None

    def __post_init__(self):
        # q = p-1 is the borderline (1-homogeneous) family; p=2, q=1 is the heat equation
        if not (0 < self.p - 1 <= self.q):
            raise InvalidArgument(f"need 0 < p-1 <= q, got p={self.p}, q={self.q}")
        u0 = self.initial_values()
        if (u0 < 0).any():
            raise InvalidArgument("initial data must be non-negative")
        g0 = self.boundary_values(0, self.grid.t_start)
        fixed = ~self.free()
        if (g0[fixed] < 0).any():
            raise InvalidArgument("boundary data must be non-negative")
        if np.abs(u0[fixed] - g0[fixed]).max(initial=0.0) > 1e-8 * (1 + np.abs(g0).max()):
            raise InvalidArgument("initial and boundary data disagree on the boundary at t=0")

    @property
    def N(self) -> int:
        return self.grid.d

    @property
    def supercritical(self) -> bool:
        return self.q < critical_exponent(self.N, self.p)

    def free(self) -> np.ndarray:
        if self.free_mask is not None:
            return np.asarray(self.free_mask, dtype=bool)
        return ~self.grid.boundary_mask()

    def initial_values(self) -> np.ndarray:
        return _nodal(self.initial, self.grid)

    def boundary_values(self, j: int, t: float) -> np.ndarray:
        if self.boundary is None:
            return self.initial_values()
        if callable(self.boundary):
            return _nodal(lambda x: self.boundary(x, t), self.grid)
        arr = np.asarray(self.boundary, dtype=float)
        if arr.ndim == self.grid.d + 1:
            arr = arr[..., None]
        return arr[j]


def _nodal(data, grid: Grid) -> np.ndarray:
    vals = np.asarray(data(grid.coords()) if callable(data) else data, dtype=float)
    if vals.shape == grid.shape:
        vals = vals[..., None]
    if vals.shape != (*grid.shape, 1):
        raise InvalidArgument(f"data shape {vals.shape} incompatible with grid {grid.shape}")
    return vals


def solve_dnl(problem: DNLProblem, params: SolverParams | None = None) -> SpaceTimeField:
    """Backward Euler in ``u^q`` with Newton on ``u`` and projection onto ``u >= 0``."""
    params = params or SolverParams()
    grid = problem.grid
    disc = Discretization(grid)
    eps = params.regularization(0.0, problem.p, grid)
    stepper = ImplicitStepper(disc, problem.free(), problem.p, eps, params,
                              q=problem.q, project=True)
    coef = np.ones(disc.n_elem)
    out = np.empty((grid.n_t, *grid.shape, 1))
    out[0] = problem.initial_values()
    times = grid.times()
    prev = out[0].reshape(-1, 1)
    for j in range(grid.n_steps):
        bc = problem.boundary_values(j + 1, times[j + 1]).reshape(-1, 1)
        U = stepper.step(prev, bc, coef, grid.dt, times[j + 1])
        out[j + 1] = U.reshape(*grid.shape, 1)
        prev = U
    return SpaceTimeField(grid, out, {"newton_iterations": list(stepper.iterations), "kind": "dnl",
                                      "p": problem.p, "q": problem.q})


# ----------------------------------------------------------------------------
# rescaling


def rescale(u: SpaceTimeField, z_o: Point, rho: float, u0: float, p: float, q: float,
            n: int | None = None, n_t: int | None = None) -> SpaceTimeField:
    """Pull ``u`` back to the unit cylinder ``[-1, 1]^N x [-1, 1]``.

    ``u~(y, s) = u(x_o + rho y, t_o + u0^(q+1-p) rho^p s) / u0``, sampled by
    multilinear interpolation.
    """
    if not u0 > 0:
        raise InvalidArgument("u0 must be positive")
    cyl = dnl_intrinsic_cylinder(z_o, rho, u0, p, q)
    g = u.grid
    if not cyl.inside(g):
        raise InvalidArgument("intrinsic cylinder is not inside the solution domain")
    if n is None:
        n = max(9, int(round(2 * rho / g.hmax)) + 1)
    if n_t is None:
        n_t = max(9, int(round(2 * cyl.duration / g.dt)) + 1)
    unit = Grid(tuple([-1.0] * g.d), tuple([1.0] * g.d), tuple([n] * g.d), 1.0, 2.0 / (n_t - 1), -1.0)
    interp = RegularGridInterpolator((g.times(), *g.axes()), u.values[..., 0], method="linear",
                                     bounds_error=False, fill_value=None)
    y = unit.coords()
    x = np.asarray(z_o.x) + rho * y
    out = np.empty((unit.n_t, *unit.shape, 1))
    for j, s in enumerate(unit.times()):
        t = z_o.t + cyl.duration * s
        pts = np.concatenate([np.full((*unit.shape, 1), t), x], axis=-1)
        out[j, ..., 0] = interp(pts.reshape(-1, g.d + 1)).reshape(unit.shape) / u0
    return SpaceTimeField(unit, out, {"rescaled_from": (z_o.x, z_o.t), "rho": rho, "u0": u0})


def to_coefficient_form(ut: SpaceTimeField, p: float, q: float) -> tuple:
    """Substitute ``v = u~^q``; returns ``(v, a)`` with ``a = (1/q)^(p-1) u~^((p-1)(1-q))``.

    The coefficient's declared bounds come from ``k = max(sup u~, 1/inf u~)``.
    """
    vals = ut.values[..., 0]
    if (vals <= 0).any():
        raise InvalidArgument("rescaled solution must be positive")
    k_bound = max(float(vals.max()), 1.0 / float(vals.min()))
    base = (1.0 / q) ** (p - 1.0)
    expo = (p - 1.0) * abs(1.0 - q)
    c_o, c_1 = base * k_bound ** (-expo), base * k_bound ** expo
    a_nodal = base * vals ** ((p - 1.0) * (1.0 - q))
    g = ut.grid
    interp = RegularGridInterpolator((g.times(), *g.axes()), a_nodal, method="linear",
                                     bounds_error=False, fill_value=None)

    def evaluate(x, t):
        x = np.asarray(x, dtype=float)
        pts = np.concatenate([np.full((*x.shape[:-1], 1), float(t)), x], axis=-1)
        return np.clip(interp(pts.reshape(-1, g.d + 1)).reshape(x.shape[:-1]), c_o, c_1)

    domain = (g.lower, g.upper)
    coef = CoefficientField(evaluate, c_o, c_1, None, domain, True, "dnl_substitution")
    v = SpaceTimeField(g, vals[..., None] ** q, {"k_bound": k_bound, "a_nodal": a_nodal})
    return v, coef


# ----------------------------------------------------------------------------
# closed-form solutions


def explicit_borderline(C_amp: float, N: int, p: float):
    """Solution for ``q = p - 1``: ``C t^(-N/(p(p-1))) exp(-((p-1)/p) (|x|^p/(p t))^(1/(p-1)))``."""
    if not p > 1:
        raise InvalidArgument("need p > 1")

    def u(x, t):
        t = np.asarray(t, dtype=float)
        if (t <= 0).any():
            raise InvalidArgument("borderline solution needs t > 0")
        r = np.sqrt((np.asarray(x, dtype=float) ** 2).sum(axis=-1))
        arg = (r ** p / (p * t)) ** (1.0 / (p - 1.0))
        return C_amp * t ** (-N / (p * (p - 1.0))) * np.exp(-(p - 1.0) / p * arg)

    return u


class CriticalSolution:
    """Non-negative solution for ``q = N(p-1)/(N-p)``.

    ``u = (|x|^(N(q+1)/(q(N-1))) + e^(b t))^(-(N-1)/(q+1))`` with
    ``b = (q+1)/(N-1) * (N/q)^p``, the unique rate for which the profile
    satisfies the equation (substitution check in the tests; the often
    quoted ``(N/q)^q`` agrees only when ``p = q``).  Calling the object
    returns ``(value, |grad u|)``.
    """

    def __init__(self, N: int, p: float):
        if N < 2 or not N > p or not p > 1:
            raise InvalidArgument("critical solution needs N >= 2 and 1 < p < N")
        self.N, self.p = N, p
        self.q = N * (p - 1.0) / (N - p)
        self.b = (self.q + 1.0) / (N - 1.0) * (N / self.q) ** p
        self.r_exp = N * (self.q + 1.0) / (self.q * (N - 1.0))

    def value(self, x, t):
        r = np.sqrt((np.asarray(x, dtype=float) ** 2).sum(axis=-1))
        return (r ** self.r_exp + np.exp(self.b * np.asarray(t, dtype=float))) ** (-(self.N - 1.0) / (self.q + 1.0))

    def gradient_magnitude(self, x, t):
        N, q = self.N, self.q
        r = np.sqrt((np.asarray(x, dtype=float) ** 2).sum(axis=-1))
        base = r ** self.r_exp + np.exp(self.b * np.asarray(t, dtype=float))
        return (N / q) * r ** ((N + q) / (q * (N - 1.0))) / base ** ((N + q) / (q + 1.0))

    def gradient(self, x, t):
        """Gradient vector, shape ``(..., N)``."""
        x = np.asarray(x, dtype=float)
        r = np.sqrt((x ** 2).sum(axis=-1))
        mag = self.gradient_magnitude(x, t)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, x / r[..., None], 0.0)
        return -mag[..., None] * unit

    def __call__(self, x, t):
        return self.value(x, t), self.gradient_magnitude(x, t)


def explicit_critical(N: int, p: float) -> CriticalSolution:
    return CriticalSolution(N, p)


# ----------------------------------------------------------------------------
# extinction


@dataclass(frozen=True)
class ExtinctionRecord:
    T_upper: float
    T_lower: float
    sobolev_constant: float
    lambda_q1: float
    T_num: float | None = None

    def __post_init__(self):
        if math.isfinite(self.T_upper) and math.isfinite(self.T_lower) and self.T_lower > self.T_upper * (1 + 1e-12):
            raise InvalidArgument("lower extinction bound exceeds upper bound; Sobolev constant invalid?")


def lambda_q1(N: int, p: float, q: float) -> float:
    return N * (p - q - 1.0) + p * (q + 1.0)


def _check_extinction_range(N, p, q):
    if not (0 < p - 1 < q < extinction_exponent_limit(N, p)):
        raise InvalidArgument(f"exponents outside 0 < p-1 < q < (N(p-1)+p)/(N-p)_+: N={N}, p={p}, q={q}")


def extinction_bounds(measure_E: float, norm_u0_q1: float, grad_norm_u0_p: float,
                      N: int, p: float, q: float, C_sob: float, T_num: float | None = None) -> ExtinctionRecord:
    """Upper and lower bounds for the extinction time.

    ``norm_u0_q1 = ||u_o||_{L^{q+1}}`` and ``grad_norm_u0_p = ||grad u_o||_{L^p}``
    (norms, not powers).
    """
    _check_extinction_range(N, p, q)
    lam = lambda_q1(N, p, q)
    upper = (q * C_sob ** p / (q + 1.0 - p)) * measure_E ** (lam / (N * (q + 1.0))) \
        * norm_u0_q1 ** (q + 1.0 - p)
    if grad_norm_u0_p > 0:
        lower = (q / (q + 1.0 - p)) * norm_u0_q1 ** (q + 1.0) / grad_norm_u0_p ** p
    else:
        lower = 0.0 if norm_u0_q1 == 0 else math.inf
    return ExtinctionRecord(upper, lower, C_sob, lam, T_num)


def envelope_rate(C_sob: float, measure_E: float, N: int, p: float, q: float) -> float:
    """Decay rate of the ``L^{q+1}`` envelope ODE ``w' = -rate w^(p/(q+1))``."""
    lam = lambda_q1(N, p, q)
    return (q + 1.0) / (q * C_sob ** p * measure_E ** (lam / (N * (q + 1.0))))


def lq_envelope(t, v0: float, rate: float, p: float, q: float):
    """``v0 [1 - rate (q+1-p) t / ((q+1) v0^((q+1-p)/(q+1)))]_+^((q+1)/(q+1-p))``."""
    t = np.asarray(t, dtype=float)
    if v0 <= 0:
        return np.zeros_like(t)
    gap = q + 1.0 - p
    bracket = 1.0 - rate * gap * t / ((q + 1.0) * v0 ** (gap / (q + 1.0)))
    return v0 * np.maximum(bracket, 0.0) ** ((q + 1.0) / gap)


def sobolev_constant(N: int, p: float, q: float) -> float:
    """A valid constant ``C`` in ``||u||_{q+1} <= C |E|^(lambda/(N p (q+1))) ||grad u||_p`` on ``W_0^{1,p}``.

    ``N = 1``: the sharp constant 1/2 of ``||u||_inf <= C |E|^(1-1/p) ||u'||_p``.
    ``N = 2``: the isoperimetric constant ``1/(2 sqrt(pi))`` of the ``W^{1,1}``
    embedding, lifted to exponent ``s`` by applying it to ``|u|^(s/(2-s))``;
    ``s = p`` when ``p < 2`` and otherwise the midpoint of the admissible
    range ``s in (2(q+1)/(q+3), 2)``.
    """
    if N == 1:
        return 0.5
    if N == 2:
        s = p if p < 2 else 0.5 * (2.0 * (q + 1.0) / (q + 3.0) + 2.0)
        return (s / (2.0 - s)) / (2.0 * math.sqrt(math.pi))
    raise InvalidArgument("Sobolev constants are provided for N in {1, 2}")


def lq_norm_power(u_level: np.ndarray, disc: Discretization, r: float) -> float:
    """``sum_i m_i |u_i|^r`` (lumped-mass quadrature)."""
    return float((disc.mass * np.abs(np.asarray(u_level).reshape(-1)) ** r).sum())


def grad_norm_power(u_level: np.ndarray, disc: Discretization, p: float) -> float:
    """``sum_e w_e |D u_e|^p`` on the solver's elements."""
    g = disc.element_gradients(np.asarray(u_level, dtype=float).reshape(-1, 1))
    return float((disc.weights * np.sqrt((g ** 2).sum(axis=(1, 2))) ** p).sum())


def detect_extinction(u: SpaceTimeField, tol: float | None = None):
    """First time at which ``sup |u| <= tol``, interpolated linearly between levels."""
    g = u.grid
    if tol is None:
        tol = 10.0 * max(g.hmax ** 2, g.dt)
    sup = np.abs(u.values).reshape(g.n_t, -1).max(axis=1)
    hits = np.nonzero(sup <= tol)[0]
    if len(hits) == 0:
        return None
    j = int(hits[0])
    times = g.times()
    if j == 0:
        return float(times[0])
    s0, s1 = sup[j - 1], sup[j]
    frac = (s0 - tol) / (s0 - s1) if s0 > s1 else 1.0
    return float(times[j - 1] + frac * g.dt)


def dnl_weak_residual(u: SpaceTimeField, p: float, q: float, zeta: SpaceTimeField) -> float:
    """``iint (u_o^q - u^q) d_t zeta + |grad u|^(p-2) grad u . grad zeta`` (trapezoid in time)."""
    g = u.grid
    z = zeta.values
    scale = max(1.0, float(np.abs(z).max()))
    if np.abs(z[:, g.boundary_mask()]).max(initial=0.0) > 1e-12 * scale or np.abs(z[-1]).max() > 1e-12 * scale:
        raise InvalidArgument("test field must vanish on the lateral boundary and at the final time")
    disc = Discretization(g)
    dzdt = np.gradient(z, g.dt, axis=0, edge_order=2)
    wt = np.full(g.n_t, g.dt)
    wt[[0, -1]] *= 0.5
    mass = disc.mass.reshape(g.shape)[..., None]
    uq = np.maximum(u.values, 0.0) ** q
    total = 0.0
    ones = np.ones(disc.n_elem)
    for j in range(g.n_t):
        total += wt[j] * float((mass * (uq[0] - uq[j]) * dzdt[j]).sum())
        gu = disc.element_gradients(u.values[j].reshape(-1, 1))
        gz = disc.element_gradients(z[j].reshape(-1, 1))
        F, _, _ = kernels.element_flux(gu, ones, 0.0, p)
        total += wt[j] * float((disc.weights[:, None, None] * F * gz).sum())
    return total


__all__ = [
    "DNLProblem", "solve_dnl", "rescale", "to_coefficient_form", "explicit_borderline",
    "explicit_critical", "CriticalSolution", "ExtinctionRecord", "extinction_bounds",
    "envelope_rate", "lq_envelope", "sobolev_constant", "detect_extinction", "lambda_q1",
    "critical_exponent", "extinction_exponent_limit", "lq_norm_power", "grad_norm_power",
    "dnl_weak_residual",
]
