"""Discrete space-time fields and the elementary operations on them.

A :class:`SpaceTimeField` stores ``values[j, i_1, ..., i_d, c]``: time level
``j``, spatial node multi-index ``i``, component ``c``.  Spatial integrals
use node averages (each node carries the cell volume), time integrals the
trapezoid rule unless stated otherwise.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidArgument
from .geometry import Cylinder, Grid


@dataclass(frozen=True)
class SpaceTimeField:
    """k-component field on the nodes of ``grid`` at every time level."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expect = (self.grid.n_t, *self.grid.shape)
        if vals.shape == expect:
            vals = vals[..., None]
        if vals.shape[:-1] != expect:
            raise InvalidArgument(f"values shape {vals.shape} does not match grid {expect} + (k,)")
        if not np.isfinite(vals).all():
            raise InvalidArgument("field values must be finite")
        vals = np.array(vals, copy=True)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def k(self) -> int:
        return self.values.shape[-1]

    def at(self, t_index: int) -> np.ndarray:
        return self.values[t_index]

    def scaled(self, c: float) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, c * self.values, dict(self.meta))

    @classmethod
    def from_function(cls, grid: Grid, func, k: int | None = None) -> "SpaceTimeField":
        """Sample ``func(x, t)`` (``x`` of shape ``(*shape, d)``) at every time level."""
        x = grid.coords()
        vals = [np.asarray(func(x, t), dtype=float) for t in grid.times()]
        arr = np.stack(vals)
        if arr.ndim == grid.d + 1:
            arr = arr[..., None]
        if k is not None and arr.shape[-1] != k:
            raise InvalidArgument("function returned the wrong number of components")
        return cls(grid, arr)


# ----------------------------------------------------------------------------
# selections


def select(u: SpaceTimeField, region=None) -> tuple:
    """Resolve a region into ``(time_indices, spatial_mask)``.

    ``region`` may be ``None`` (whole field), a :class:`Cylinder`, or an
    explicit ``(time_indices, mask)`` pair.
    """
    grid = u.grid
    if region is None:
        return np.arange(grid.n_t), np.ones(grid.shape, dtype=bool)
    if isinstance(region, Cylinder):
        tidx = region.time_indices(grid)
        mask = region.spatial_mask(grid)
    else:
        tidx, mask = region
        tidx = np.atleast_1d(np.asarray(tidx, dtype=int))
        mask = np.asarray(mask, dtype=bool)
    if len(tidx) == 0 or not mask.any():
        raise InvalidArgument("empty region")
    return tidx, mask


def region_values(u: SpaceTimeField, region=None) -> np.ndarray:
    tidx, mask = select(u, region)
    return u.values[tidx][:, mask, :].reshape(-1, u.k)


def _spatial_mask(u: SpaceTimeField, A) -> np.ndarray:
    if isinstance(A, Cylinder):
        mask = A.spatial_mask(u.grid)
    else:
        mask = np.asarray(A, dtype=bool)
    if not mask.any():
        raise InvalidArgument("empty region")
    return mask


# ----------------------------------------------------------------------------
# derivatives, means, norms


def gradient(u: SpaceTimeField, t_index: int) -> np.ndarray:
    """Spatial gradient at one time level, shape ``(*shape, k, d)``.

    Second-order central differences inside, second-order one-sided at the
    boundary.
    """
    return _grad_array(u.values[t_index], u.grid)


def _grad_array(vals: np.ndarray, grid: Grid, time_axis: bool = False) -> np.ndarray:
    off = 1 if time_axis else 0
    parts = [np.gradient(vals, grid.h[ax], axis=ax + off, edge_order=2) for ax in range(grid.d)]
    return np.stack(parts, axis=-1)


def gradient_all(u: SpaceTimeField) -> np.ndarray:
    """Gradient at every time level, shape ``(n_t, *shape, k, d)``."""
    return _grad_array(u.values, u.grid, time_axis=True)


def gradient_norm(u: SpaceTimeField) -> np.ndarray:
    """Frobenius norm of the gradient at every node, shape ``(n_t, *shape)``."""
    g = gradient_all(u)
    return np.sqrt((g ** 2).sum(axis=(-2, -1)))


def slicewise_mean(u: SpaceTimeField, A, t_index: int) -> np.ndarray:
    """Node average of ``u(., t)`` over the spatial region ``A``."""
    mask = _spatial_mask(u, A)
    return u.values[t_index][mask].mean(axis=0)


def cylinder_mean(u: SpaceTimeField, Q) -> np.ndarray:
    return region_values(u, Q).mean(axis=0)


def oscillation(u: SpaceTimeField, region=None) -> float:
    """``sup |u(z) - u(z')|`` over node pairs, Euclidean in the components."""
    vals = region_values(u, region)
    return diameter(vals)


def diameter(vals: np.ndarray) -> float:
    """Largest pairwise Euclidean distance among the rows of ``vals``."""
    vals = np.asarray(vals, dtype=float).reshape(len(vals), -1)
    if len(vals) == 0:
        raise InvalidArgument("empty region")
    if vals.shape[1] == 1:
        return float(vals.max() - vals.min())
    vals = np.unique(vals, axis=0)
    if len(vals) > 64:
        vals = vals[_hull_vertices(vals)]
    # unit-spaced dummy coordinates make every pair admissible; alpha=0 gives plain differences
    index = np.arange(len(vals), dtype=float)[:, None]
    best, _ = kernels.pair_quotient_max(vals, index, np.zeros(len(vals)), 0.0, 0.0, 0.0)
    return float(best)


def _hull_vertices(vals: np.ndarray) -> np.ndarray:
    from scipy.spatial import ConvexHull, QhullError

    try:
        return ConvexHull(vals, qhull_options="QJ").vertices
    except (QhullError, ValueError):
        return np.arange(len(vals))


def lp_mean(u: SpaceTimeField, Q, p: float) -> float:
    """Average of ``|u|**p`` over the node set of ``Q``."""
    vals = region_values(u, Q)
    return float((np.sqrt((vals ** 2).sum(axis=1)) ** p).mean())


def discrete_lr_norm(u: SpaceTimeField, r: float) -> float:
    """``(sum over all space-time nodes of |u|^r * h^d * dt)^(1/r)``."""
    mag = np.sqrt((u.values ** 2).sum(axis=-1))
    return float(((mag ** r).sum() * u.grid.cell_volume * u.grid.dt) ** (1.0 / r))


def steklov_average(u: SpaceTimeField, h: float) -> SpaceTimeField:
    """Forward Steklov average ``(1/h) int_t^{t+h} u ds`` of the piecewise-linear-in-time field.

    Levels with ``t + h > t_end`` are set to zero.
    """
    grid = u.grid
    span = grid.t_end - grid.t_start
    if not 0 < h < span:
        raise InvalidArgument(f"Steklov step must lie in (0, {span}), got {h}")
    dt = grid.dt
    vals = u.values
    ratio = h / dt
    m = int(np.floor(ratio + 1e-9))
    theta = ratio - m if ratio - m > 1e-9 else 0.0
    # levels j whose window [t_j, t_j + h] fits inside the grid
    n_valid = grid.n_t - m - (1 if theta > 0 else 0)
    out = np.zeros_like(vals)
    if n_valid > 0:
        acc = np.zeros_like(vals[:n_valid])
        for l in range(m):
            acc += vals[l:l + n_valid] + vals[l + 1:l + 1 + n_valid]
        acc *= 0.5 * dt
        if theta > 0:
            # partial last segment of the piecewise-linear interpolant
            a, b = vals[m:m + n_valid], vals[m + 1:m + 1 + n_valid]
            acc += 0.5 * theta * dt * (2 * a + theta * (b - a))
        out[:n_valid] = acc / h
    return SpaceTimeField(grid, out, dict(u.meta))


# ----------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class CoefficientField:
    """Scalar coefficient ``a(x, t)`` with declared bounds.

    ``evaluator(x, t)`` receives coordinates of shape ``(..., d)`` and a
    scalar time and returns an array of shape ``(...)``.  ``domain`` is an
    optional ``(lower, upper)`` box outside of which evaluation is refused.
    """

    evaluator: object
    C_o: float
    C_1: float
    alpha: float | None = None
    domain: tuple | None = None
    time_dependent: bool = False
    label: str = "coefficient"

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.domain is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.domain)
            tol = 1e-9 * float(np.max(hi - lo))
            if (x < lo - tol).any() or (x > hi + tol).any():
                raise InvalidArgument(f"{self.label} evaluated outside its domain")
        return np.asarray(self.evaluator(x, t), dtype=float) * np.ones(x.shape[:-1])

    def check_bounds(self, grid: Grid, n_pairs: int | None = None) -> dict:
        """Check ``C_o <= a <= C_1`` and the spatial Hoelder bound on grid nodes."""
        x = grid.coords()
        worst_low, worst_high, holder = np.inf, -np.inf, 0.0
        times = grid.times() if self.time_dependent else grid.times()[:1]
        for t in times:
            a = self(x, t)
            worst_low = min(worst_low, float(a.min()))
            worst_high = max(worst_high, float(a.max()))
            if self.alpha is not None:
                flat = a.reshape(-1, 1)
                xs = x.reshape(-1, grid.d)
                q, _ = kernels.pair_quotient_max(flat, xs, np.zeros(len(xs)), 0.0, self.alpha, 0.0)
                holder = max(holder, q)
        return {
            "min": worst_low,
            "max": worst_high,
            "holder": holder,
            "ok": bool(worst_low >= self.C_o - 1e-12 and worst_high <= self.C_1 + 1e-12
                       and holder <= self.C_1 + 1e-12),
        }


def constant_coefficient(value: float = 1.0) -> CoefficientField:
    return CoefficientField(lambda x, t: np.full(np.shape(x)[:-1], float(value)), value, value,
                            None, None, False, f"constant({value})")


def holder_bump(alpha: float, center, amplitude: float = 0.5, domain=None) -> CoefficientField:
    """``a(x) = 1 + amplitude * |x - center|**alpha`` (time independent).

    ``C_1`` is chosen so that both the upper bound and the Hoelder constant
    ``amplitude`` fit under it on ``domain`` (diameter 2 if no domain given).
    """
    if not 0 < alpha < 1:
        raise InvalidArgument("Hoelder exponent must lie in (0, 1)")
    center = np.asarray(center, dtype=float)
    if domain is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in domain)
        corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(len(lo), -1).T
        reach = float(np.sqrt(((corners - center) ** 2).sum(axis=1)).max())
    else:
        reach = 2.0

    def evaluate(x, t):
        return 1.0 + amplitude * np.sqrt(((x - center) ** 2).sum(axis=-1)) ** alpha

    c1 = max(1.0 + amplitude * reach ** alpha, amplitude)
    return CoefficientField(evaluate, 1.0, c1, alpha, domain, False,
                            f"holder_bump(alpha={alpha}, amp={amplitude})")


@functools.lru_cache(maxsize=8)
def _mollifier_rule(d: int, n: int = 101) -> tuple:
    """Quadrature nodes and weights for the standard mollifier on the unit ball."""
    line = np.linspace(-1.0, 1.0, n)
    pts = np.stack(np.meshgrid(*([line] * d), indexing="ij"), axis=-1).reshape(-1, d)
    r2 = (pts ** 2).sum(axis=1)
    inside = r2 < 1.0
    pts, r2 = pts[inside], r2[inside]
    w = np.exp(-1.0 / (1.0 - r2))
    w /= w.sum()
    pts.flags.writeable = False
    w.flags.writeable = False
    return pts, w


def mollify_coefficient(a: CoefficientField, eps: float, n_quad: int = 101,
                        dim: int | None = None) -> CoefficientField:
    """Spatial mollification ``a_eps = a * phi_eps`` with the standard bump.

    The result keeps the declared ``C_o, C_1, alpha`` and lives on the
    domain shrunk by ``eps``.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    if a.domain is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in a.domain)
        if (hi - lo <= 2 * eps).any():
            raise InvalidArgument("eps too large for the coefficient's domain")
        domain = (tuple(lo + eps), tuple(hi - eps))
        dim = len(lo)
    else:
        domain = None
        if dim is None:
            raise InvalidArgument("dimension needed for a coefficient without domain")
    pts, w = _mollifier_rule(dim, n_quad)
    shift = eps * pts

    def evaluate(x, t):
        flat = x.reshape(-1, dim)
        out = np.empty(len(flat))
        for s in range(0, len(flat), 32):
            block = flat[s:s + 32]
            vals = a(block[:, None, :] - shift[None, :, :], t)
            out[s:s + 32] = vals @ w
        return out.reshape(x.shape[:-1])

    return CoefficientField(evaluate, a.C_o, a.C_1, a.alpha, domain, a.time_dependent,
                            f"mollified({a.label}, eps={eps})")


# ----------------------------------------------------------------------------
# Hoelder seminorms


def holder_seminorm(u: SpaceTimeField, alpha: float, region=None, axis: str = "space") -> float:
    """Discrete Hoelder seminorm along space or time.

    Pairs closer than two grid cells (``2h`` in space, ``2 dt`` in time) are
    excluded.  Along time the quotient is ``|u - u'| / |t - t'|**alpha``;
    pass ``alpha/2`` for the parabolic scaling.
    """
    tidx, mask = select(u, region)
    grid = u.grid
    best, count = 0.0, 0
    if axis == "space":
        xs = grid.coords()[mask]
        zeros = np.zeros(len(xs))
        gap = 2.0 * grid.hmax * (1 - 1e-9)
        for j in tidx:
            q, c = kernels.pair_quotient_max(u.values[j][mask], xs, zeros, 0.0, alpha, gap)
            best, count = max(best, q), count + c
    elif axis == "time":
        times = grid.times()[tidx][:, None]
        zeros = np.zeros(len(tidx))
        gap = 2.0 * grid.dt * (1 - 1e-9)
        block = u.values[tidx][:, mask, :]
        for i in range(block.shape[1]):
            q, c = kernels.pair_quotient_max(block[:, i, :], times, zeros, 0.0, alpha, gap)
            best, count = max(best, q), count + c
    else:
        raise InvalidArgument("axis must be 'space' or 'time'")
    if count == 0:
        raise InvalidArgument("no admissible node pairs in region")
    return float(best)


__all__ = [
    "SpaceTimeField", "select", "region_values", "gradient", "gradient_all", "gradient_norm",
    "slicewise_mean", "cylinder_mean", "oscillation", "diameter", "lp_mean", "discrete_lr_norm",
    "steklov_average", "CoefficientField", "constant_coefficient", "holder_bump",
    "mollify_coefficient", "holder_seminorm",
]
