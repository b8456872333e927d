"""Structured grids, space-time cylinders and parabolic distances.

Cylinders are described in continuous coordinates and snapped to grid
nodes on demand.  Two cross-sections are supported: Euclidean balls
(used for the p-Laplace checks) and cubes ``|x - x_o|_inf <= rho`` (used
for the doubly non-linear checks).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgument

_SNAP = 1e-9


@dataclass(frozen=True)
class Point:
    """A space-time point ``(x, t)``."""

    x: tuple
    t: float = 0.0

    def __post_init__(self):
        x = self.x
        if np.isscalar(x):
            x = (float(x),)
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "t", float(self.t))

    @property
    def dim(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in ``d`` space dimensions plus a uniform time axis.

    The number of time steps is ``round((t_end - t_start) / dt)``; ``dt`` is
    snapped so that the last level lands exactly on ``t_end``.
    """

    lower: tuple
    upper: tuple
    n: tuple
    t_end: float
    dt: float
    t_start: float = 0.0
    h: tuple = field(init=False)
    n_steps: int = field(init=False)

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        n = np.atleast_1d(self.n)
        if len(n) == 1 and len(lower) > 1:
            n = np.repeat(n, len(lower))
        n = tuple(int(v) for v in n)
        if len(lower) not in (1, 2) or len(lower) != len(upper) or len(n) != len(lower):
            raise InvalidArgument("grid must be 1D or 2D with matching extents and node counts")
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise InvalidArgument("each axis needs upper > lower")
        if any(v < 8 for v in n):
            raise InvalidArgument(f"need at least 8 nodes per axis, got {n}")
        if not self.dt > 0 or not self.t_end > self.t_start:
            raise InvalidArgument("need dt > 0 and t_end > t_start")
        steps = max(1, int(round((self.t_end - self.t_start) / self.dt)))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "n_steps", steps)
        object.__setattr__(self, "dt", (self.t_end - self.t_start) / steps)
        object.__setattr__(self, "h", tuple((hi - lo) / (m - 1) for lo, hi, m in zip(lower, upper, n)))

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def n_t(self) -> int:
        return self.n_steps + 1

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def hmax(self) -> float:
        return max(self.h)

    def axes(self) -> list:
        return [np.linspace(lo, hi, m) for lo, hi, m in zip(self.lower, self.upper, self.n)]

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_t)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, d)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.d):
            sl = [slice(None)] * self.d
            sl[ax] = 0
            mask[tuple(sl)] = True
            sl[ax] = -1
            mask[tuple(sl)] = True
        return mask

    def refine(self, levels: int = 1) -> "Grid":
        f = 2 ** levels
        return Grid(self.lower, self.upper, tuple((m - 1) * f + 1 for m in self.n),
                    self.t_end, self.dt / f, self.t_start)

    def time_index(self, t: float) -> int:
        """Index of the time level nearest to ``t``."""
        j = int(round((t - self.t_start) / self.dt))
        if j < 0 or j >= self.n_t:
            raise InvalidArgument(f"time {t} outside grid window [{self.t_start}, {self.t_end}]")
        return j

    def node_index(self, x) -> tuple:
        """Multi-index of the node nearest to ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for xi, lo, hi, h, m in zip(x, self.lower, self.upper, self.h, self.n):
            if xi < lo - _SNAP * (hi - lo) or xi > hi + _SNAP * (hi - lo):
                raise InvalidArgument(f"point {tuple(x)} outside grid")
            idx.append(min(m - 1, max(0, int(round((xi - lo) / h)))))
        return tuple(idx)

    def contains_box(self, lo, hi) -> bool:
        tol = [_SNAP * (b - a) for a, b in zip(self.lower, self.upper)]
        return all(l >= a - e and u <= b + e for l, u, a, b, e in zip(lo, hi, self.lower, self.upper, tol))


@dataclass(frozen=True)
class Cylinder:
    """Space-time cylinder ``A x I``.

    ``duration`` is the backward length ``S`` of ``(t_o - S, t_o]`` for
    ``time_kind='backward'`` and the half-length of ``(t_o - S, t_o + S)``
    for ``time_kind='symmetric'``.
    """

    center: Point
    radius: float
    duration: float
    cross_section: str = "ball"
    time_kind: str = "backward"
    scaling: tuple | None = None

    def __post_init__(self):
        if not self.radius > 0 or not self.duration > 0:
            raise InvalidArgument("cylinder needs radius > 0 and duration > 0")
        if self.cross_section not in ("ball", "cube"):
            raise InvalidArgument(f"unknown cross-section {self.cross_section!r}")
        if self.time_kind not in ("backward", "symmetric"):
            raise InvalidArgument(f"unknown time kind {self.time_kind!r}")

    @property
    def time_interval(self) -> tuple:
        t = self.center.t
        if self.time_kind == "backward":
            return (t - self.duration, t)
        return (t - self.duration, t + self.duration)

    def spatial_box(self) -> tuple:
        x = np.asarray(self.center.x)
        return tuple(x - self.radius), tuple(x + self.radius)

    def inside(self, grid: Grid) -> bool:
        lo, hi = self.spatial_box()
        t0, t1 = self.time_interval
        eps = _SNAP * max(1.0, grid.t_end - grid.t_start)
        return grid.contains_box(lo, hi) and t0 >= grid.t_start - eps and t1 <= grid.t_end + eps

    def spatial_mask(self, grid: Grid) -> np.ndarray:
        return region_mask(grid, self.center.x, self.radius, self.cross_section)

    def time_indices(self, grid: Grid) -> np.ndarray:
        t0, t1 = self.time_interval
        times = grid.times()
        eps = _SNAP * max(1.0, abs(t1 - t0))
        return np.nonzero((times >= t0 - eps) & (times <= t1 + eps))[0]

    def nodes(self, grid: Grid, min_nodes: int = 3) -> tuple:
        """Return ``(time_indices, spatial_mask)`` after checking resolution."""
        mask = self.spatial_mask(grid)
        tidx = self.time_indices(grid)
        for ax in range(grid.d):
            other = tuple(a for a in range(grid.d) if a != ax)
            count = int(mask.any(axis=other).sum()) if other else int(mask.sum())
            if count < min_nodes:
                raise InvalidArgument(
                    f"cylinder resolves only {count} nodes along axis {ax}; need {min_nodes}")
        if len(tidx) < min_nodes:
            raise InvalidArgument(f"cylinder resolves only {len(tidx)} time levels; need {min_nodes}")
        return tidx, mask


def region_mask(grid: Grid, center, radius: float, cross_section: str = "ball") -> np.ndarray:
    """Boolean mask of grid nodes inside a ball or cube."""
    diff = grid.coords() - np.asarray(center, dtype=float)
    tol = _SNAP * radius
    if cross_section == "ball":
        return np.sqrt((diff ** 2).sum(axis=-1)) <= radius + tol
    if cross_section == "cube":
        return np.abs(diff).max(axis=-1) <= radius + tol
    raise InvalidArgument(f"unknown cross-section {cross_section!r}")


def standard_cylinder(z_o: Point, radius: float, duration: float | None = None,
                      cross_section: str = "ball") -> Cylinder:
    """Backward cylinder ``Q_{R,S}(z_o)``; ``S`` defaults to ``R**2``."""
    if duration is None:
        duration = radius ** 2
    return Cylinder(z_o, radius, duration, cross_section, "backward", None)


def intrinsic_cylinder(z_o: Point, rho: float, lam: float, p: float) -> Cylinder:
    """Backward ball cylinder of radius ``rho`` and length ``lam**(2-p) * rho**2``."""
    if not rho > 0 or not lam > 0:
        raise InvalidArgument("intrinsic cylinder needs rho > 0 and lambda > 0")
    if not p > 1:
        raise InvalidArgument("need p > 1")
    return Cylinder(z_o, rho, lam ** (2.0 - p) * rho ** 2, "ball", "backward", ("intrinsic", lam, p))


def dnl_intrinsic_cylinder(z_o: Point, rho: float, u0: float, p: float, q: float) -> Cylinder:
    """Symmetric cube cylinder with half-length ``u0**(q+1-p) * rho**p``."""
    if not u0 > 0:
        raise InvalidArgument("u0 must be positive")
    if not rho > 0:
        raise InvalidArgument("rho must be positive")
    if not (q > p - 1 > 0):
        raise InvalidArgument("need q > p - 1 > 0")
    return Cylinder(z_o, rho, u0 ** (q + 1.0 - p) * rho ** p, "cube", "symmetric", ("dnl", u0, p, q))


def par_distance(z1: Point, z2: Point) -> float:
    """Parabolic distance ``|x1 - x2| + sqrt(|t1 - t2|)``."""
    if z1.dim != z2.dim:
        raise InvalidArgument("points of different dimension")
    dx = math.dist(z1.x, z2.x)
    return dx + math.sqrt(abs(z1.t - z2.t))


def intrinsic_par_distance(z1: Point, z2: Point, lam: float, p: float) -> float:
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    if z1.dim != z2.dim:
        raise InvalidArgument("points of different dimension")
    return math.dist(z1.x, z2.x) + math.sqrt(lam ** (p - 2.0) * abs(z1.t - z2.t))


def _boundary_samples(domain: Cylinder, spacing: float, dt: float):
    """Sample the lateral and initial parts of the parabolic boundary."""
    x0 = np.asarray(domain.center.x)
    d = len(x0)
    r = domain.radius
    t0, t1 = domain.time_interval
    m = max(2, int(math.ceil(2 * r / spacing)) + 1)
    line = np.linspace(-r, r, m)
    if d == 1:
        lateral_x = np.array([[-r], [r]])
        initial_x = line[:, None]
    elif domain.cross_section == "cube":
        faces = []
        for fixed in (-r, r):
            faces.append(np.stack([np.full(m, fixed), line], axis=1))
            faces.append(np.stack([line, np.full(m, fixed)], axis=1))
        lateral_x = np.concatenate(faces)
        gx, gy = np.meshgrid(line, line, indexing="ij")
        initial_x = np.stack([gx.ravel(), gy.ravel()], axis=1)
    else:
        k = max(8, int(math.ceil(2 * math.pi * r / spacing)))
        th = 2 * math.pi * np.arange(k) / k
        lateral_x = r * np.stack([np.cos(th), np.sin(th)], axis=1)
        gx, gy = np.meshgrid(line, line, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        initial_x = pts[np.sqrt((pts ** 2).sum(axis=1)) <= r * (1 + _SNAP)]
    nt = max(2, int(math.ceil((t1 - t0) / dt)) + 1)
    lateral_t = np.linspace(t0, t1, nt)[1:]
    return x0 + lateral_x, lateral_t, x0 + initial_x, t0


def par_boundary_distance(K, domain: Cylinder, spacing: float | None = None,
                          dt: float | None = None, time_exponent: float = 0.5) -> tuple:
    """Distance from a region ``K`` to the parabolic boundary of ``domain``.

    ``K`` is an array of space-time points with shape ``(M, d+1)`` (time in
    the last column) or a sequence of :class:`Point`.  The boundary is sampled
    at ``spacing`` in space and ``dt`` in time (defaults: ``radius/64``).

    Returns ``(distance, rho)`` with ``rho = min(1, distance) / 4``.  The
    distance uses ``|x - y| + |t - s|**time_exponent``.
    """
    if domain.time_kind != "backward":
        raise InvalidArgument("parabolic boundary is defined for backward cylinders")
    pts = _as_points(K)
    spacing = spacing or domain.radius / 64.0
    dt = dt or domain.duration / 64.0
    lat_x, lat_t, init_x, t_init = _boundary_samples(domain, spacing, dt)
    xs, ts = pts[:, :-1], pts[:, -1]
    x0 = np.asarray(domain.center.x)
    t0, t1 = domain.time_interval
    tol = 1e-9 * max(1.0, domain.radius)
    rel = xs - x0
    inside = (np.sqrt((rel ** 2).sum(axis=1)) if domain.cross_section == "ball"
              else np.abs(rel).max(axis=1)) <= domain.radius + tol
    if not inside.all() or (ts < t0 - tol).any() or (ts > t1 + tol).any():
        raise InvalidArgument("K is not contained in the domain")
    # spatial and temporal minima separate; query each distinct node and time once
    ux, xinv = np.unique(xs, axis=0, return_inverse=True)
    uts, tinv = np.unique(ts, return_inverse=True)
    dx_lat = cKDTree(lat_x).query(ux)[0][xinv.ravel()]
    dx_init = cKDTree(init_x).query(ux)[0][xinv.ravel()]
    dt_lat = (np.abs(uts[:, None] - lat_t[None, :]) ** time_exponent).min(axis=1)[tinv.ravel()]
    lat = dx_lat + dt_lat
    ini = dx_init + np.abs(ts - t_init) ** time_exponent
    best = float(np.minimum(lat, ini).min())
    if best < tol:
        best = 0.0
    return best, 0.25 * min(1.0, best)


def _as_points(K) -> np.ndarray:
    if isinstance(K, Point):
        K = [K]
    if isinstance(K, np.ndarray):
        arr = np.atleast_2d(np.asarray(K, dtype=float))
    else:
        arr = np.array([list(z.x) + [z.t] for z in K], dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidArgument("region K must be a non-empty set of points")
    return arr


def cylinder_points(grid: Grid, cyl: Cylinder) -> np.ndarray:
    """Space-time node coordinates of a cylinder on ``grid``, shape ``(M, d+1)``."""
    tidx = cyl.time_indices(grid)
    mask = cyl.spatial_mask(grid)
    xs = grid.coords()[mask]
    ts = grid.times()[tidx]
    out = np.empty((len(ts) * len(xs), grid.d + 1))
    out[:, :-1] = np.tile(xs, (len(ts), 1))
    out[:, -1] = np.repeat(ts, len(xs))
    return out


def box_domain(grid: Grid) -> Cylinder:
    """The space-time cylinder ``E x (t_start, t_end]`` of a square grid as a cube cylinder."""
    widths = [hi - lo for lo, hi in zip(grid.lower, grid.upper)]
    if not np.allclose(widths, widths[0]):
        raise InvalidArgument("box_domain needs equal extents on all axes")
    center = tuple(0.5 * (lo + hi) for lo, hi in zip(grid.lower, grid.upper))
    return Cylinder(Point(center, grid.t_end), 0.5 * widths[0], grid.t_end - grid.t_start,
                    "cube", "backward")


__all__ = [
    "Point", "Grid", "Cylinder", "region_mask", "standard_cylinder", "intrinsic_cylinder",
    "dnl_intrinsic_cylinder", "par_distance", "intrinsic_par_distance",
    "par_boundary_distance", "cylinder_points", "box_domain",
]
