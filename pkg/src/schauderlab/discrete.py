"""Element gradient, its adjoint divergence, and the damped Newton step.

Space is discretized with piecewise-linear elements: intervals in 1D and
the right-triangle split of every grid cell in 2D.  ``D`` maps nodal values
to the constant gradient on each element; the discrete divergence is
``div_h F = -M^{-1} D^T W F`` with element areas ``W`` and the lumped node
mass ``M``, i.e. the exact negative adjoint of ``D``.  On the uniform
right-triangle split and ``p = 2`` this reproduces the five-point Laplacian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import SolverFailure
from .geometry import Grid


class Discretization:
    """Element gradient operator on a :class:`Grid`."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.n_nodes = int(np.prod(grid.shape))
        if grid.d == 1:
            self._build_1d()
        else:
            self._build_2d()
        self.n_elem = len(self.weights)
        # lumped mass: each element shares its measure equally among its vertices
        verts = self.element_nodes
        mass = np.zeros(self.n_nodes)
        np.add.at(mass, verts.ravel(), np.repeat(self.weights / verts.shape[1], verts.shape[1]))
        self.mass = mass
        self.DT = self.D.T.tocsr()

    def _build_1d(self):
        (n,), (h,) = self.grid.shape, self.grid.h
        e = np.arange(n - 1)
        rows = np.r_[e, e]
        cols = np.r_[e, e + 1]
        vals = np.r_[np.full(n - 1, -1.0 / h), np.full(n - 1, 1.0 / h)]
        self.D = sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))
        self.weights = np.full(n - 1, h)
        self.element_nodes = np.stack([e, e + 1], axis=1)
        x = self.grid.axes()[0]
        self.centroids = (0.5 * (x[:-1] + x[1:]))[:, None]

    def _build_2d(self):
        (nx, ny), (hx, hy) = self.grid.shape, self.grid.h
        idx = np.arange(nx * ny).reshape(nx, ny)
        a = idx[:-1, :-1].ravel()   # (i, j)
        b = idx[1:, :-1].ravel()    # (i+1, j)
        c = idx[:-1, 1:].ravel()    # (i, j+1)
        d = idx[1:, 1:].ravel()     # (i+1, j+1)
        nc = len(a)
        E = 2 * nc
        e_lo = np.arange(nc)
        e_up = nc + e_lo
        # lower triangle (a, b, c): grad = ((u_b - u_a)/hx, (u_c - u_a)/hy)
        # upper triangle (d, c, b): grad = ((u_d - u_c)/hx, (u_d - u_b)/hy)
        rows = np.r_[e_lo, e_lo, e_up, e_up,
                     E + e_lo, E + e_lo, E + e_up, E + e_up]
        cols = np.r_[b, a, d, c,
                     c, a, d, b]
        vals = np.r_[np.full(nc, 1 / hx), np.full(nc, -1 / hx), np.full(nc, 1 / hx), np.full(nc, -1 / hx),
                     np.full(nc, 1 / hy), np.full(nc, -1 / hy), np.full(nc, 1 / hy), np.full(nc, -1 / hy)]
        self.D = sp.csr_matrix((vals, (rows, cols)), shape=(2 * E, nx * ny))
        self.weights = np.full(E, 0.5 * hx * hy)
        self.element_nodes = np.concatenate([np.stack([a, b, c], 1), np.stack([d, c, b], 1)])
        xs, ys = self.grid.axes()
        X, Y = np.meshgrid(xs[:-1], ys[:-1], indexing="ij")
        lo = np.stack([X.ravel() + hx / 3, Y.ravel() + hy / 3], axis=1)
        up = np.stack([X.ravel() + 2 * hx / 3, Y.ravel() + 2 * hy / 3], axis=1)
        self.centroids = np.concatenate([lo, up])

    # -- operators -----------------------------------------------------------

    def element_gradients(self, U: np.ndarray) -> np.ndarray:
        """Nodal values ``(N, k)`` -> element gradients ``(E, k, d)``."""
        G = self.D @ U
        d = self.grid.d
        return G.reshape(d, self.n_elem, -1).transpose(1, 2, 0)

    def divergence_weak(self, F: np.ndarray) -> np.ndarray:
        """``D^T W F`` for element fluxes ``(E, k, d)``; returns ``(N, k)``."""
        Fw = F * self.weights[:, None, None]
        flat = Fw.transpose(2, 0, 1).reshape(self.grid.d * self.n_elem, -1)
        return self.DT @ flat

    def divergence(self, F: np.ndarray) -> np.ndarray:
        """Discrete divergence ``-M^{-1} D^T W F`` at the nodes."""
        return -self.divergence_weak(F) / self.mass[:, None]

    def stiffness(self, coef: np.ndarray, phi: np.ndarray, dphi: np.ndarray | None,
                  grads: np.ndarray) -> sp.csr_matrix:
        """Linearization ``G^T W A G`` of ``U -> D^T W flux(DU)`` for k components.

        ``A`` is block diagonal over elements with blocks
        ``a (phi I + dphi xi xi^T)``; pass ``dphi=None`` for the lagged
        (Picard) operator ``a phi I``.
        """
        E, k, d = grads.shape
        kd = k * d
        base = self.weights * coef
        if dphi is None:
            Dk = self.D if k == 1 else sp.kron(sp.identity(k), self.D, format="csr")
            A = sp.diags(np.tile(base * phi, kd))
            return (Dk.T @ A @ Dk).tocsr()
        xi = grads.reshape(E, kd)  # index c*d + alpha
        rows, cols, vals = [], [], []
        e = np.arange(E)
        for I in range(kd):
            for J in range(kd):
                v = base * dphi * xi[:, I] * xi[:, J]
                if I == J:
                    v = v + base * phi
                rows.append(I * E + e)
                cols.append(J * E + e)
                vals.append(v)
        A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(kd * E, kd * E))
        Dk = self.D if k == 1 else sp.kron(sp.identity(k), self.D, format="csr")
        return (Dk.T @ A @ Dk).tocsr()


@dataclass
class SolverParams:
    """Nonlinear solver controls.

    ``eps_reg=None`` selects the default floor: ``h**2`` when ``mu == 0`` and
    ``p < 2``, else 0.  A step that fails to converge is retried as two half
    steps, recursively up to ``substep_depth`` times.
    """

    newton_tol: float = 1e-10
    max_newton_iters: int = 60
    damping: float = 1.0
    picard_fallback: bool = True
    eps_reg: float | None = None
    max_halvings: int = 20
    substep_depth: int = 4

    def __post_init__(self):
        from .errors import InvalidArgument

        if not self.newton_tol > 0:
            raise InvalidArgument("newton_tol must be positive")
        if not 0 < self.damping <= 1:
            raise InvalidArgument("damping must lie in (0, 1]")
        if self.eps_reg is not None and self.eps_reg < 0:
            raise InvalidArgument("eps_reg must be non-negative")
        if self.substep_depth < 0:
            raise InvalidArgument("substep_depth must be non-negative")

    def regularization(self, mu: float, p: float, grid: Grid) -> float:
        if self.eps_reg is not None:
            return float(self.eps_reg)
        return grid.hmax ** 2 if (mu == 0 and p < 2) else 0.0


class ImplicitStepper:
    """Backward-Euler step ``M (T(U+) - T(U)) / dt + D^T W a flux(D U+) = 0``.

    ``T`` is the identity (``q is None``) or ``max(u, 0)**q``.  Unknowns are
    the nodes flagged in ``free``; all other nodes carry Dirichlet values.
    The convergence test uses the scaled residual ``dt * R / m`` (units of
    ``T(u)``).
    """

    def __init__(self, disc: Discretization, free: np.ndarray, p: float, mu_eff: float,
                 params: SolverParams, q: float | None = None, u_floor: float = 1e-12,
                 project: bool = False):
        self.disc = disc
        self.free = np.asarray(free, dtype=bool).ravel()
        self.free_idx = np.nonzero(self.free)[0]
        self.p = p
        self.mu = mu_eff
        self.params = params
        self.q = q
        self.u_floor = u_floor
        self.project = project
        self.iterations = []
        self.reuse_ratio = 0.25
        self._lu_cache = None
        self._lu_key = None
        self._stale = True

    # time term
    def _T(self, U):
        if self.q is None:
            return U
        return np.maximum(U, 0.0) ** self.q

    def _dT(self, U):
        if self.q is None:
            return np.ones_like(U)
        return self.q * np.maximum(U, self.u_floor) ** (self.q - 1.0)

    def residual(self, U, T_old, coef, dt):
        grads = self.disc.element_gradients(U)
        flux, phi, dphi = kernels.element_flux(grads, coef, self.mu, self.p)
        R = self.disc.mass[:, None] * (self._T(U) - T_old) / dt + self.disc.divergence_weak(flux)
        return R, grads, phi, dphi

    def _scaled_norm(self, R, dt):
        k = R.shape[1]
        Rf = R[self.free_idx]
        if Rf.size == 0:
            return 0.0
        return float(np.abs(dt * Rf / self.disc.mass[self.free_idx, None]).max()) if k else 0.0

    def _jacobian(self, U, coef, grads, phi, dphi, dt, newton):
        K = self.disc.stiffness(coef, phi, dphi if newton else None, grads)
        k = U.shape[1]
        diag = (self.disc.mass[:, None] * self._dT(U) / dt).T.ravel()
        J = K + sp.diags(diag)
        idx = np.concatenate([c * self.disc.n_nodes + self.free_idx for c in range(k)])
        return J[idx][:, idx].tocsc(), idx

    def step(self, U_old, U_bc, coef, dt, t_new=None, linear=False, _depth=0):
        """Advance one step; ``U_bc`` supplies the Dirichlet values at the new level.

        On failure the interval is bisected, with Dirichlet values interpolated
        linearly in time and ``coef`` held fixed.
        """
        try:
            return self._step(U_old, U_bc, coef, dt, t_new, linear)
        except SolverFailure:
            if _depth >= self.params.substep_depth:
                raise
        half = 0.5 * dt
        t_mid = None if t_new is None else t_new - half
        U_mid_bc = 0.5 * (np.asarray(U_old, dtype=float) + U_bc)
        U = self.step(U_old, U_mid_bc, coef, half, t_mid, linear, _depth + 1)
        return self.step(U, U_bc, coef, half, t_new, linear, _depth + 1)

    def _step(self, U_old, U_bc, coef, dt, t_new=None, linear=False):
        """Single backward-Euler solve.

        The factorized Jacobian is reused across iterations and steps while
        it keeps contracting the residual by at least ``reuse_ratio``; a
        stale factorization that fails to reduce the residual is refreshed
        before any damping is attempted.
        """
        U = np.array(U_old, dtype=float, copy=True)
        fixed = ~self.free
        U[fixed] = U_bc[fixed]
        T_old = self._T(U_old)
        R, grads, phi, dphi = self.residual(U, T_old, coef, dt)
        rnorm = self._scaled_norm(R, dt)
        newton = True
        tol = self.params.newton_tol
        if self._lu_key != (dt, U.shape[1]):
            self._lu_cache, self._lu_key = None, (dt, U.shape[1])
        for it in range(self.params.max_newton_iters + 1):
            if rnorm <= tol:
                self.iterations.append(it)
                return U
            if it == self.params.max_newton_iters:
                break
            fresh = False
            if not newton or self._lu_cache is None or (self._stale and not linear):
                J, idx = self._jacobian(U, coef, grads, phi, dphi, dt, newton)
                lu = splu(J, permc_spec="MMD_AT_PLUS_A")
                fresh = True
                if newton:
                    self._lu_cache, self._stale = (lu, idx), False
            else:
                lu, idx = self._lu_cache
            rhs = -R.T.ravel()[idx]
            full = np.zeros(U.size)
            full[idx] = lu.solve(rhs)
            full = full.reshape(U.shape[1], -1).T
            if not newton:
                U = U + full
                if self.project:
                    U = np.maximum(U, 0.0)
                R, grads, phi, dphi = self.residual(U, T_old, coef, dt)
                rnorm = self._scaled_norm(R, dt)
                continue
            lam = self.params.damping
            for _ in range(self.params.max_halvings + 1):
                U_try = U + lam * full
                if self.project:
                    U_try = np.maximum(U_try, 0.0)
                R_try, g_try, phi_try, dphi_try = self.residual(U_try, T_old, coef, dt)
                r_try = self._scaled_norm(R_try, dt)
                if r_try < rnorm or not (fresh or linear):
                    break
                lam *= 0.5
            else:
                if not self.params.picard_fallback:
                    raise SolverFailure("damped Newton stalled", rnorm, t_new)
                newton = False
                continue
            if not (r_try < rnorm):
                # stale factorization made no progress: refresh and retry
                self._stale = True
                continue
            if r_try > self.reuse_ratio * rnorm:
                self._stale = True
            U, R, grads, phi, dphi, rnorm = U_try, R_try, g_try, phi_try, dphi_try, r_try
        raise SolverFailure("nonlinear iteration did not converge", rnorm, t_new)


__all__ = ["Discretization", "SolverParams", "ImplicitStepper"]
