"""Implicit solver for the parabolic p-Laplace system with coefficient ``a(x, t)``.

    d_t u - div( a(x, t) (mu^2 + |Du|^2)^((p-2)/2) Du ) = 0

for ``u`` with ``k`` components.  Components interact only through the
scalar factor ``(mu^2 + |Du|^2)^((p-2)/2)`` with the Frobenius norm ``|Du|``.
The coefficient is sampled at element centroids and at the midpoint of each
time step.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .discrete import Discretization, ImplicitStepper, SolverParams
from .errors import InvalidArgument
from .fields import CoefficientField, SpaceTimeField, constant_coefficient
from .geometry import Cylinder, Grid, Point


@dataclass(frozen=True, eq=False)
class PLaplaceProblem:
    """Cauchy-Dirichlet problem on a grid.

    ``initial`` is a callable ``x -> (..., k)`` or a nodal array
    ``(*shape, k)``.  ``boundary`` is a callable ``(x, t) -> (..., k)``, a
    nodal array ``(n_t, *shape, k)`` aligned with the grid's time levels,
    or ``None`` (boundary values frozen at the initial data).  ``free_mask``
    marks the unknown nodes (default: interior nodes); every other node is
    Dirichlet.  ``frozen_at`` evaluates the coefficient at a fixed point.
    """

    p: float
    mu: float
    k: int
    coefficient: CoefficientField
    grid: Grid
    initial: object
    boundary: object = None
    free_mask: np.ndarray | None = None
    frozen_at: tuple | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidArgument("need p > 1")
        if not 0 <= self.mu <= 1:
            raise InvalidArgument("need mu in [0, 1]")
        if self.k < 1:
            raise InvalidArgument("need k >= 1")
        u0 = self.initial_values()
        g0 = self.boundary_values(0, self.grid.t_start)
        fixed = ~self.free()
        scale = 1.0 + float(np.abs(g0[fixed]).max(initial=0.0))
        if np.abs(u0[fixed] - g0[fixed]).max(initial=0.0) > 1e-8 * scale:
            raise InvalidArgument("initial and boundary data disagree on the boundary at t=0")

    def free(self) -> np.ndarray:
        if self.free_mask is not None:
            return np.asarray(self.free_mask, dtype=bool)
        return ~self.grid.boundary_mask()

    def initial_values(self) -> np.ndarray:
        return _nodal(self.initial, self.grid, self.k, None)

    def boundary_values(self, j: int, t: float) -> np.ndarray:
        if self.boundary is None:
            return self.initial_values()
        if callable(self.boundary):
            return _nodal(lambda x: self.boundary(x, t), self.grid, self.k, None)
        arr = np.asarray(self.boundary, dtype=float)
        if arr.ndim == self.grid.d + 1:
            arr = arr[..., None]
        return arr[j]

    def coefficient_at(self, disc: Discretization, t: float) -> np.ndarray:
        if self.frozen_at is not None:
            val = float(np.asarray(self.coefficient(np.asarray([self.frozen_at]), t)).ravel()[0])
            return np.full(disc.n_elem, val)
        return np.asarray(self.coefficient(disc.centroids, t), dtype=float).ravel()

    @property
    def time_independent_coefficient(self) -> bool:
        return not self.coefficient.time_dependent


def _nodal(data, grid: Grid, k: int, t) -> np.ndarray:
    if callable(data):
        vals = np.asarray(data(grid.coords()), dtype=float)
    else:
        vals = np.asarray(data, dtype=float)
    if vals.shape == grid.shape:
        vals = vals[..., None]
    if vals.shape != (*grid.shape, k):
        raise InvalidArgument(f"data shape {vals.shape} incompatible with grid {grid.shape} and k={k}")
    return vals


def flux(xi, mu: float, p: float) -> np.ndarray:
    """``(mu^2 + |xi|^2)^((p-2)/2) xi`` with the Frobenius norm; ``xi`` is ``(..., k, d)``.

    Returns 0 at ``xi = 0`` when ``mu = 0`` and ``p < 2``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[None, :]
    shape = xi.shape
    flat = xi.reshape(-1, *shape[-2:])
    out, _, _ = kernels.element_flux(flat, np.ones(len(flat)), float(mu), float(p))
    return out.reshape(shape)


def flux_gap(xi, xi_t, mu: float, p: float) -> tuple:
    """Lipschitz and monotonicity ratios of the flux for one pair.

    Both are normalized by ``(mu^2 + |xi|^2 + |xi_t|^2)^((p-2)/2)`` times
    ``|xi - xi_t|`` (resp. its square).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    xi_t = np.atleast_2d(np.asarray(xi_t, dtype=float))
    diff = xi - xi_t
    nd = float(np.sqrt((diff ** 2).sum()))
    if nd == 0.0:
        raise InvalidArgument("flux_gap needs distinct arguments")
    dF = flux(xi, mu, p) - flux(xi_t, mu, p)
    weight = (mu ** 2 + (xi ** 2).sum() + (xi_t ** 2).sum()) ** (0.5 * (p - 2.0))
    lip = float(np.sqrt((dF ** 2).sum())) / (weight * nd)
    mono = float((dF * diff).sum()) / (weight * nd ** 2)
    return lip, mono


def _stepper(problem: PLaplaceProblem, params: SolverParams, disc: Discretization) -> ImplicitStepper:
    mu_eff = max(problem.mu, params.regularization(problem.mu, problem.p, problem.grid))
    return ImplicitStepper(disc, problem.free(), problem.p, mu_eff, params)


def step_implicit(state, dt: float, problem: PLaplaceProblem, params: SolverParams | None = None,
                  t: float | None = None, _cache: dict | None = None) -> np.ndarray:
    """One backward-Euler step from nodal ``state`` ``(*shape, k)`` at time ``t``.

    Dirichlet values are taken from the problem at ``t + dt``.
    """
    params = params or SolverParams()
    grid = problem.grid
    state = np.asarray(state, dtype=float)
    if state.shape == grid.shape:
        state = state[..., None]
    if not np.isfinite(state).all():
        raise InvalidArgument("state must be finite")
    t = grid.t_start if t is None else t
    cache = _cache if _cache is not None else {}
    disc = cache.get("disc") or Discretization(grid)
    stepper = cache.get("stepper") or _stepper(problem, params, disc)
    cache.update(disc=disc, stepper=stepper)
    t_new = t + dt
    j_new = int(round((t_new - grid.t_start) / grid.dt))
    bc = problem.boundary_values(min(j_new, grid.n_t - 1), t_new).reshape(-1, problem.k)
    coef = problem.coefficient_at(disc, t + 0.5 * dt)
    linear = (problem.p == 2 and problem.time_independent_coefficient
              and cache.get("dt", dt) == dt)
    cache["dt"] = dt
    U = stepper.step(state.reshape(-1, problem.k), bc, coef, dt, t_new, linear=linear)
    return U.reshape(state.shape)


def solve_cauchy_dirichlet(problem: PLaplaceProblem, params: SolverParams | None = None) -> SpaceTimeField:
    """March the implicit scheme over the grid's time levels.

    The result carries ``meta['newton_iterations']`` (one count per step).
    """
    params = params or SolverParams()
    grid = problem.grid
    out = np.empty((grid.n_t, *grid.shape, problem.k))
    out[0] = problem.initial_values()
    cache = {}
    times = grid.times()
    for j in range(grid.n_steps):
        out[j + 1] = step_implicit(out[j], grid.dt, problem, params, times[j], cache)
    iters = cache["stepper"].iterations if "stepper" in cache else []
    return SpaceTimeField(grid, out, {"newton_iterations": list(iters), "kind": "plaplace",
                                      "p": problem.p, "mu": problem.mu})


# ----------------------------------------------------------------------------
# frozen coefficients


def freeze_coefficients(problem: PLaplaceProblem, x_o, Q: Cylinder, u: SpaceTimeField) -> PLaplaceProblem:
    """Comparison problem on ``Q`` with coefficient ``a(x_o, t)`` and data ``u`` on its parabolic boundary.

    The returned problem lives on the sub-grid covering ``Q``; nodes of the
    discrete ball whose four axis neighbours are also in the ball are
    unknowns, all others are fixed to ``u``.
    """
    x_o = tuple(np.atleast_1d(np.asarray(x_o.x if isinstance(x_o, Point) else x_o, dtype=float)))
    grid = u.grid
    if not Q.inside(grid):
        raise InvalidArgument("cylinder exceeds the solution domain")
    if np.linalg.norm(np.subtract(x_o, Q.center.x)) > Q.radius * (1 + 1e-12):
        raise InvalidArgument("freezing point must lie in the cylinder")
    sub, sl, tidx = subgrid_for(grid, Q)
    vals = u.values[tidx][(slice(None), *sl)]
    mask = Q.spatial_mask(sub)
    free = interior_of(mask)
    coef = problem.coefficient
    frozen = replace(problem, grid=sub, initial=vals[0], boundary=vals, free_mask=free,
                     frozen_at=x_o, coefficient=coef)
    return frozen


def subgrid_for(grid: Grid, Q: Cylinder, min_nodes: int = 8) -> tuple:
    """Sub-grid covering the spatial box and time window of ``Q``.

    Returns ``(subgrid, spatial_slices, time_indices)``.
    """
    lo, hi = Q.spatial_box()
    slices, lows, ups, ns = [], [], [], []
    for ax in range(grid.d):
        h, x0, n = grid.h[ax], grid.lower[ax], grid.n[ax]
        i0 = max(0, int(np.ceil((lo[ax] - x0) / h - 1e-9)))
        i1 = min(n - 1, int(np.floor((hi[ax] - x0) / h + 1e-9)))
        while i1 - i0 + 1 < min_nodes and (i0 > 0 or i1 < n - 1):
            if i0 > 0:
                i0 -= 1
            if i1 - i0 + 1 < min_nodes and i1 < n - 1:
                i1 += 1
        slices.append(slice(i0, i1 + 1))
        lows.append(x0 + i0 * h)
        ups.append(x0 + i1 * h)
        ns.append(i1 - i0 + 1)
    tidx = Q.time_indices(grid)
    if len(tidx) < 2:
        raise InvalidArgument("cylinder spans fewer than two time levels")
    times = grid.times()
    sub = Grid(tuple(lows), tuple(ups), tuple(ns), times[tidx[-1]], grid.dt, times[tidx[0]])
    return sub, tuple(slices), tidx


def interior_of(mask: np.ndarray) -> np.ndarray:
    """Nodes of ``mask`` whose axis neighbours all lie in ``mask`` (and not on the array edge)."""
    inner = mask.copy()
    for ax in range(mask.ndim):
        for shift in (1, -1):
            rolled = np.roll(mask, shift, axis=ax)
            edge = [slice(None)] * mask.ndim
            edge[ax] = 0 if shift == 1 else -1
            rolled[tuple(edge)] = False
            inner &= rolled
    return inner


# ----------------------------------------------------------------------------
# weak form


def weak_form_residual(u: SpaceTimeField, problem: PLaplaceProblem, zeta: SpaceTimeField,
                       local: bool = False) -> float:
    """Discrete ``iint (u_o - u) . d_t zeta + a flux(Du) . D zeta``.

    Time integrals use the trapezoid rule, space integrals the lumped node
    mass for the first term and element-midpoint quadrature for the second.
    ``zeta`` must vanish on the lateral boundary and at the final time (and
    also at the initial time when ``local=True``).
    """
    grid = u.grid
    if zeta.grid != grid or zeta.k != u.k:
        raise InvalidArgument("test field must live on the solution grid with matching k")
    z = zeta.values
    scale = max(1.0, float(np.abs(z).max()))
    bmask = grid.boundary_mask()
    if np.abs(z[:, bmask]).max(initial=0.0) > 1e-12 * scale:
        raise InvalidArgument("test field must vanish on the lateral boundary")
    if np.abs(z[-1]).max() > 1e-12 * scale:
        raise InvalidArgument("test field must vanish at the final time")
    if local and np.abs(z[0]).max() > 1e-12 * scale:
        raise InvalidArgument("test field must vanish at the initial time")
    disc = Discretization(grid)
    dzdt = np.gradient(z, grid.dt, axis=0, edge_order=2)
    u_o = u.values[0]
    wt = np.full(grid.n_t, grid.dt)
    wt[[0, -1]] *= 0.5
    mass = disc.mass.reshape(grid.shape)[..., None]
    term1 = sum(wt[j] * float((mass * (u_o - u.values[j]) * dzdt[j]).sum()) for j in range(grid.n_t))
    term2 = 0.0
    for j, t in enumerate(grid.times()):
        gu = disc.element_gradients(u.values[j].reshape(-1, u.k))
        gz = disc.element_gradients(z[j].reshape(-1, u.k))
        coef = problem.coefficient_at(disc, t)
        F, _, _ = kernels.element_flux(gu, coef, problem.mu, problem.p)
        term2 += wt[j] * float((disc.weights[:, None, None] * F * gz).sum())
    return term1 + term2


__all__ = [
    "PLaplaceProblem", "SolverParams", "flux", "flux_gap", "step_implicit",
    "solve_cauchy_dirichlet", "freeze_coefficients", "subgrid_for", "interior_of",
    "weak_form_residual", "constant_coefficient",
]
