"""Measured left sides, constant-free right sides and implied constants.

Every checker returns an :class:`EstimateReport` (or a tuple of them).  A
report is *gated* when it carries a budget: constant checks pass when
``implied_constant <= budget``, rate checks when the fitted exponent is at
least ``budget``.  Reports without a budget are informational.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from .errors import InvalidArgument, OutOfRange
from .fields import SpaceTimeField, _grad_array, diameter, select
from .geometry import (Cylinder, Grid, Point, box_domain, dnl_intrinsic_cylinder,
                       intrinsic_cylinder, par_boundary_distance, standard_cylinder)

PASS, FAIL, HYPOTHESIS, REPORT, SKIPPED = "pass", "fail", "hypothesis-not-met", "report-only", "skipped"

CSV_COLUMNS = ("name", "anchor", "status", "passed", "lhs", "rhs_kernel", "implied_constant",
               "budget", "exponents", "parameters", "grid", "details")


@dataclass
class EstimateReport:
    name: str
    anchor: str
    lhs: float
    rhs_kernel: float
    implied_constant: float
    exponents: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    status: str = REPORT
    passed: bool = True
    budget: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def gated(self) -> bool:
        return self.status in (PASS, FAIL)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self) -> list:
        d = self.to_dict()
        return [_flat(d[c]) for c in CSV_COLUMNS]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _flat(v) -> str:
    if isinstance(v, dict):
        return ";".join(f"{k}={_flat(v[k])}" for k in sorted(v))
    if isinstance(v, list):
        return "[" + " ".join(_flat(x) for x in v) + "]"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True)


def reports_to_csv(reports, header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def report_from_dict(d: dict) -> EstimateReport:
    def num(v):
        return float(v) if isinstance(v, str) else v
    return EstimateReport(d["name"], d["anchor"], num(d["lhs"]), num(d["rhs_kernel"]),
                          num(d["implied_constant"]), d.get("exponents", {}), d.get("parameters", {}),
                          d.get("grid", {}), d["status"], d["passed"], d.get("budget"), d.get("details", {}))


# ----------------------------------------------------------------------------
# shared helpers


def grid_descriptor(grid: Grid) -> dict:
    return {"d": grid.d, "n": list(grid.n), "lower": list(grid.lower), "upper": list(grid.upper),
            "t_start": grid.t_start, "t_end": grid.t_end, "dt": grid.dt}


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def _constant_report(name, anchor, lhs, rhs, budget, u, params, exponents=None, details=None):
    C = _ratio(lhs, rhs)
    if budget is None:
        status, ok = REPORT, True
    else:
        ok = bool(C <= budget)
        status = PASS if ok else FAIL
    return EstimateReport(name, anchor, float(lhs), float(rhs), float(C), exponents or {}, params,
                          grid_descriptor(u.grid), status, ok, budget, details or {})


def _gradients(u: SpaceTimeField, tidx) -> np.ndarray:
    """Nodal gradients at the listed time levels, shape ``(len(tidx), *shape, k, d)``."""
    return _grad_array(u.values[np.asarray(tidx)], u.grid, time_axis=True)


def _node_weight(grid: Grid) -> float:
    return grid.cell_volume


def _fro(g: np.ndarray) -> np.ndarray:
    return np.sqrt((g ** 2).sum(axis=(-2, -1)))


def _check_inside(Q: Cylinder, grid: Grid, what: str = "cylinder"):
    if not Q.inside(grid):
        raise InvalidArgument(f"{what} is not inside the solution domain")


def _point_value(u: SpaceTimeField, z: Point) -> np.ndarray:
    g = u.grid
    out = []
    for c in range(u.k):
        interp = RegularGridInterpolator((g.times(), *g.axes()), u.values[..., c], method="linear")
        out.append(float(interp([(z.t, *z.x)])[0]))
    return np.array(out)


def _region_samples(u: SpaceTimeField, region, arrays, max_points: int | None, seed: int):
    """Space-time coordinates of the region's nodes plus the matching rows of ``arrays``.

    ``arrays`` are indexed like ``u.values`` over the region's time levels;
    with ``max_points`` a deterministic random subset is returned.
    """
    tidx, mask = select(u, region)
    g = u.grid
    xs = np.broadcast_to(g.coords()[mask], (len(tidx), int(mask.sum()), g.d)).reshape(-1, g.d)
    ts = np.repeat(g.times()[tidx], int(mask.sum()))
    rows = [a[:, mask].reshape(len(xs), -1) for a in arrays]
    if max_points is not None and len(xs) > max_points:
        pick = np.sort(np.random.default_rng(seed).choice(len(xs), max_points, replace=False))
        xs, ts, rows = xs[pick], ts[pick], [r[pick] for r in rows]
    return np.ascontiguousarray(xs), np.ascontiguousarray(ts), rows


def envelope_fit(values, xs, ts, c: float, d_min: float, d_max: float, nbins: int = 12,
                 floor: float = 0.0) -> dict:
    """Log-log least-squares slope of the binned modulus of continuity.

    The modulus is non-decreasing, so only record bins (whose maximum
    exceeds every maximum at shorter distance) enter the fit; bins whose
    largest difference does not exceed ``floor`` are ignored.
    Returns ``{"slope", "bins", "pairs", "max_diff"}``; ``slope`` is ``None``
    when fewer than three bins survive.
    """
    if not d_max > d_min > 0:
        raise InvalidArgument("need 0 < d_min < d_max")
    bmax, bdist, bcount = kernels.pair_envelope(values, xs, ts, c, d_min, d_max, nbins)
    prev = np.maximum.accumulate(np.r_[0.0, bmax[:-1]])
    keep = (bcount > 0) & (bmax > floor) & (bmax > prev)
    out = {"pairs": int(bcount.sum()), "bins": int(keep.sum()),
           "max_diff": float(bmax.max()) if len(bmax) else 0.0, "slope": None}
    if keep.sum() >= 3:
        slope, _ = np.polyfit(np.log(bdist[keep]), np.log(bmax[keep]), 1)
        out["slope"] = float(slope)
    return out


def _roundoff_floor(values) -> float:
    return 10.0 * np.finfo(float).eps * max(1.0, float(np.abs(values).max(initial=0.0)))


def alpha_star(alpha: float, p: float) -> float:
    """``alpha`` for ``p < 2`` and ``alpha/(p-1)`` otherwise."""
    if not 0 < alpha <= 1 or not p > 1:
        raise InvalidArgument("need 0 < alpha <= 1 and p > 1")
    return alpha if p < 2 else alpha / (p - 1.0)


def scaling_deficit(N: int, p: float) -> float:
    """``2p/((N+2)p - 2N)``; defined for ``p > 2N/(N+2)``."""
    if not p > 2.0 * N / (N + 2.0):
        raise OutOfRange(f"scaling deficit needs p > 2N/(N+2) = {2.0 * N / (N + 2.0):.6g}")
    return 2.0 * p / ((N + 2.0) * p - 2.0 * N)


# ----------------------------------------------------------------------------
# p-Laplace estimates


def check_energy_estimate(u: SpaceTimeField, problem, inner: Cylinder, outer: Cylinder, xi,
                          budget: float | None = None) -> EstimateReport:
    """Caccioppoli-type energy estimate on concentric backward cylinders."""
    if inner.time_kind != "backward" or outer.time_kind != "backward":
        raise InvalidArgument("energy estimate uses backward cylinders")
    if not (np.allclose(inner.center.x, outer.center.x) and math.isclose(inner.center.t, outer.center.t)):
        raise InvalidArgument("cylinders must be concentric")
    r, R, s, S = inner.radius, outer.radius, inner.duration, outer.duration
    if not (0 < r < R and 0 < s < S):
        raise InvalidArgument("need r < R and s < S")
    g = u.grid
    _check_inside(outer, g, "outer cylinder")
    p, mu = problem.p, problem.mu
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (u.k,))
    w = _node_weight(g)
    ti, mi = inner.nodes(g)
    to, mo = outer.nodes(g)
    dev_in = u.values[ti][:, mi, :] - xi
    slice_int = (dev_in ** 2).sum(axis=-1).sum(axis=1) * w
    grad_in = _fro(_gradients(u, ti))[:, mi]
    energy = ((mu ** 2 + grad_in ** 2) ** (p / 2.0)).sum() * w * g.dt
    lhs = float(slice_int.max() + energy)
    dev = np.sqrt(((u.values[to][:, mo, :] - xi) ** 2).sum(axis=-1))
    rhs = float((dev ** p / (R - r) ** p + dev ** 2 / (S - s) + mu ** p).sum() * w * g.dt)
    params = {"p": p, "mu": mu, "r": r, "R": R, "s": s, "S": S, "xi": list(xi)}
    return _constant_report("energy_estimate", "energy estimate (zero order)", lhs, rhs, budget, u,
                            params, details={"sup_slice": float(slice_int.max()), "energy": float(energy)})


def default_upper_data(w: SpaceTimeField, free_mask) -> np.ndarray:
    """Componentwise maximum of ``w`` over the discrete parabolic boundary."""
    return _boundary_values(w, free_mask).max(axis=0)


def _boundary_values(w: SpaceTimeField, free_mask) -> np.ndarray:
    free = np.asarray(free_mask, dtype=bool)
    lateral = w.values[:, ~free, :].reshape(-1, w.k)
    initial = w.values[0][free].reshape(-1, w.k)
    return np.concatenate([lateral, initial])


def check_comparison_principle(w: SpaceTimeField, Q: Cylinder | None = None, xi=None, zeta=None,
                               free_mask=None, tol: float = 1e-8) -> EstimateReport:
    """Componentwise maximum principle for a frozen-coefficient solution.

    The discrete parabolic boundary consists of the fixed nodes at every
    level plus all nodes at the initial level.  ``xi`` (upper) and ``zeta``
    (lower) default to the componentwise boundary extrema.
    """
    g = w.grid
    if free_mask is None:
        from .plaplace import interior_of
        if Q is None:
            raise InvalidArgument("need the cylinder or the free-node mask")
        free_mask = interior_of(Q.spatial_mask(g))
    free = np.asarray(free_mask, dtype=bool)
    bnd = _boundary_values(w, free)
    xi = bnd.max(axis=0) if xi is None else np.broadcast_to(np.asarray(xi, dtype=float), (w.k,))
    zeta = bnd.min(axis=0) if zeta is None else np.broadcast_to(np.asarray(zeta, dtype=float), (w.k,))
    hyp = max(float(np.maximum(bnd - xi, 0).max()), float(np.maximum(zeta - bnd, 0).max()))
    vals = w.values[:, free, :].reshape(-1, w.k)
    over = float(np.maximum(vals - xi, 0).max(initial=0.0))
    under = float(np.maximum(zeta - vals, 0).max(initial=0.0))
    lhs = max(over, under)
    params = {"xi": list(xi), "zeta": list(zeta), "tol": tol}
    if hyp > tol:
        return EstimateReport("comparison_principle", "componentwise comparison", lhs, tol, _ratio(lhs, tol),
                              {}, params, grid_descriptor(g), HYPOTHESIS, True, None,
                              {"boundary_violation": hyp})
    ok = lhs <= tol
    return EstimateReport("comparison_principle", "componentwise comparison", lhs, tol, _ratio(lhs, tol),
                          {}, params, grid_descriptor(g), PASS if ok else FAIL, ok, 1.0,
                          {"upper_violation": over, "lower_violation": under})


def check_osc_comparison(u: SpaceTimeField, w: SpaceTimeField, Q: Cylinder, tol: float = 1e-6) -> EstimateReport:
    """``osc_Q w <= sqrt(k) osc_Q u``."""
    osc_w = diameter(w.values[select(w, Q)[0]][:, Q.spatial_mask(w.grid), :].reshape(-1, w.k))
    tu, mu_ = select(u, Q)
    osc_u = diameter(u.values[tu][:, mu_, :].reshape(-1, u.k))
    rhs = math.sqrt(u.k) * osc_u
    ok = osc_w <= rhs + tol
    return EstimateReport("osc_comparison", "oscillation comparison", osc_w, rhs, _ratio(osc_w, rhs), {},
                          {"k": u.k, "tol": tol}, grid_descriptor(w.grid), PASS if ok else FAIL, ok, None,
                          {"osc_u": osc_u})


def _subfield(u: SpaceTimeField, sub: Grid, slices, tidx) -> SpaceTimeField:
    return SpaceTimeField(sub, u.values[np.asarray(tidx)][(slice(None), *slices)])


def check_comparison_estimate(u: SpaceTimeField, problem, z_o: Point, radii, params=None,
                              slack: float = 0.2) -> EstimateReport:
    """Decay of ``iint |Du - Dw|^p / iint (mu^2 + |Du|^2)^(p/2)`` in the radius.

    ``w`` solves the frozen-coefficient problem on ``Q_{R,R^2}(z_o)``.  The
    run passes when the log-log slope is at least ``alpha* p - slack``.
    """
    from .plaplace import freeze_coefficients, solve_cauchy_dirichlet, subgrid_for

    radii = sorted((float(r) for r in radii), reverse=True)
    if len(radii) < 3:
        raise InvalidArgument("need at least three radii")
    if max(radii) > 1:
        raise InvalidArgument("radii must not exceed 1")
    p, mu = problem.p, problem.mu
    alpha = problem.coefficient.alpha
    a_star = alpha_star(alpha, p) if alpha is not None else None
    D, E, C = [], [], []
    for R in radii:
        Q = standard_cylinder(z_o, R)
        _check_inside(Q, u.grid)
        frozen = freeze_coefficients(problem, z_o, Q, u)
        w = solve_cauchy_dirichlet(frozen, params)
        sub, sl, tidx = subgrid_for(u.grid, Q)
        us = _subfield(u, sub, sl, tidx)
        mask = Q.spatial_mask(sub)
        levels = np.arange(1, sub.n_t)
        gu = _gradients(us, levels)[:, mask]
        gw = _gradients(w, levels)[:, mask]
        vol = sub.cell_volume * sub.dt
        D.append(float((_fro(gu - gw) ** p).sum() * vol))
        E.append(float(((mu ** 2 + _fro(gu) ** 2) ** (p / 2.0)).sum() * vol))
        C.append(_ratio(D[-1], R ** (a_star * p) * E[-1]) if a_star is not None else math.nan)
    ratios = np.array([_ratio(d, e) for d, e in zip(D, E)])
    pars = {"p": p, "mu": mu, "alpha": alpha, "alpha_star": a_star, "radii": radii,
            "z_o": [*z_o.x, z_o.t]}
    details = {"D": D, "E": E, "ratio": ratios.tolist(), "C_hat": C}
    if problem.coefficient.time_dependent:
        # a(x, t) is only seen at step midpoints; rough-in-time data is not resolved
        details["coefficient_time_sampling"] = "midpoint"
    if ratios.max() <= 1e-20 or a_star is None:
        return EstimateReport("comparison_estimate", "frozen-coefficient comparison", float(ratios.max()), 1.0,
                              float(ratios.max()), {"slope": None}, pars, grid_descriptor(u.grid),
                              SKIPPED, True, None, details)
    slope = float(np.polyfit(np.log(radii), np.log(ratios), 1)[0])
    target = a_star * p - slack
    ok = slope >= target
    return EstimateReport("comparison_estimate", "frozen-coefficient comparison", float(ratios[-1]),
                          float(radii[-1] ** (a_star * p)), float(max(C)), {"slope": slope}, pars,
                          grid_descriptor(u.grid), PASS if ok else FAIL, ok, target, details)


def bump(grid: Grid, center, R: float) -> np.ndarray:
    """Smooth bump supported in ``B_R(center)``, unit discrete integral."""
    r2 = ((grid.coords() - np.asarray(center, dtype=float)) ** 2).sum(axis=-1) / R ** 2
    eta = np.zeros(grid.shape)
    inside = r2 < 1
    eta[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    total = eta.sum() * grid.cell_volume
    if total <= 0:
        raise InvalidArgument("ball too small for the grid")
    return eta / total


def check_gluing(u: SpaceTimeField, problem, center, R: float, t1: float, t2: float,
                 budget: float | None = None) -> EstimateReport:
    """Slice-mean drift ``|int (u(t2) - u(t1)) eta_R|`` against ``((t2-t1)/R)(mu^2+|Du|_inf^2)^((p-1)/2)``."""
    g = u.grid
    if t2 < t1:
        t1, t2 = t2, t1
    j1, j2 = g.time_index(t1), g.time_index(t2)
    eta = bump(g, center, R)
    drift = ((u.values[j2] - u.values[j1]) * eta[..., None]).sum(axis=tuple(range(g.d))) * g.cell_volume
    lhs = float(np.sqrt((drift ** 2).sum()))
    Q = Cylinder(Point(tuple(np.atleast_1d(center)), t2), R, max(t2 - t1, g.dt), "ball", "backward")
    tidx, mask = select(u, Q)
    G = float(_fro(_gradients(u, tidx))[:, mask].max())
    p, mu = problem.p, problem.mu
    rhs = (t2 - t1) / R * (mu ** 2 + G ** 2) ** ((p - 1.0) / 2.0)
    return _constant_report("gluing", "gluing lemma", lhs, rhs, budget, u,
                            {"p": p, "mu": mu, "R": R, "t1": t1, "t2": t2}, details={"grad_sup": G})


def check_oscillation_lemma(u: SpaceTimeField, Q: Cylinder, p: float, mu: float,
                            budget: float | None = None) -> EstimateReport:
    """Smallest ``C`` with ``osc_Q u <= 4 R |Du|_inf + C ((tau2-tau1)/R)(mu^2+|Du|_inf^2)^((p-1)/2)``."""
    tidx, mask = Q.nodes(u.grid)
    osc = diameter(u.values[tidx][:, mask, :].reshape(-1, u.k))
    G = float(_fro(_gradients(u, tidx))[:, mask].max())
    t0, t1 = Q.time_interval
    R = Q.radius
    first = 4.0 * R * G
    second = (t1 - t0) / R * (mu ** 2 + G ** 2) ** ((p - 1.0) / 2.0)
    excess = max(0.0, osc - first)
    C = _ratio(excess, second)
    if budget is None:
        status, ok = REPORT, True
    else:
        ok = C <= budget
        status = PASS if ok else FAIL
    return EstimateReport("oscillation_lemma", "oscillation via gradient and time drift", osc, second, C,
                          {}, {"p": p, "mu": mu, "R": R}, grid_descriptor(u.grid), status, ok, budget,
                          {"spatial_term": first, "grad_sup": G})


def check_gradient_sup_bound(u: SpaceTimeField, K: Cylinder, rho: float, mu: float, p: float,
                             ambient: Cylinder | None = None, budget: float | None = None) -> EstimateReport:
    """``sup_K |Du| <= C lambda`` with ``lambda = osc/rho + (osc/rho)^(2/p) + mu``.

    The oscillation is taken over ``ambient``, by default ``K`` widened by
    ``2 rho`` in space and ``(2 rho)^2`` in time.
    """
    if not rho > 0:
        raise InvalidArgument("rho must be positive")
    if ambient is None:
        ambient = Cylinder(K.center, K.radius + 2 * rho, K.duration + 4 * rho ** 2, K.cross_section, K.time_kind)
    _check_inside(ambient, u.grid, "ambient cylinder")
    osc = diameter(u.values[ambient.time_indices(u.grid)][:, ambient.spatial_mask(u.grid), :].reshape(-1, u.k))
    lam = osc / rho + (osc / rho) ** (2.0 / p) + mu
    tidx, mask = select(u, K)
    lhs = float(_fro(_gradients(u, tidx))[:, mask].max())
    return _constant_report("gradient_sup_bound", "local gradient sup bound", lhs, lam, budget, u,
                            {"p": p, "mu": mu, "rho": rho}, details={"lambda": lam, "osc": osc})


def fit_holder_exponent(u: SpaceTimeField, K, lam: float, rho: float, p: float, max_points: int = 4000,
                        seed: int = 0, nbins: int = 12) -> EstimateReport:
    """Hoelder exponent of ``Du`` in the intrinsic parabolic metric.

    Distances are ``(|dx| + sqrt(lam^(p-2) |dt|)) / (min(1, lam^((p-2)/2)) rho)``;
    the fit uses the binned envelope of gradient differences.  A fitted
    exponent in ``(0, 1]`` passes.
    """
    if not lam > 0 or not rho > 0:
        raise InvalidArgument("lambda and rho must be positive")
    g = u.grid
    tidx, _ = select(u, K)
    grads = _gradients(u, tidx)
    flat = grads.reshape(len(tidx), *g.shape, -1)
    full = np.zeros((g.n_t, *g.shape, flat.shape[-1]))
    full[tidx] = flat
    xs, ts, (vals,) = _region_samples(u, K, [full[tidx]], max_points, seed)
    scale = min(1.0, lam ** ((p - 2.0) / 2.0))
    unit = scale * rho
    xs_n, c = xs / unit, lam ** (p - 2.0) / unit ** 2
    gap = 2.0 * g.hmax * scale / unit
    span = float(np.ptp(xs_n, axis=0).sum() + math.sqrt(c * np.ptp(ts))) if len(xs) > 1 else 0.0
    params = {"p": p, "lambda": lam, "rho": rho}
    max_diff = diameter(vals) if len(vals) > 1 else 0.0
    if max_diff <= 1e-10:
        return EstimateReport("holder_exponent", "gradient Hoelder fit", max_diff, 0.0, 0.0, {"alpha_o": None},
                              params, grid_descriptor(g), SKIPPED, True, None, {"reason": "gradient constant"})
    fit = envelope_fit(vals, xs_n, ts, c, gap, max(span, gap * 1.01), nbins, _roundoff_floor(vals))
    if fit["pairs"] < 30:
        raise InvalidArgument(f"only {fit['pairs']} admissible pairs; need 30")
    a = fit["slope"]
    if a is None:
        raise InvalidArgument("too few populated distance bins for a fit")
    C, _ = kernels.pair_quotient_max(vals, xs_n, ts, c, min(max(a, 0.0), 1.0), gap)
    ok = 0 < a <= 1
    return EstimateReport("holder_exponent", "gradient Hoelder fit", max_diff, 1.0, float(C), {"alpha_o": a},
                          params, grid_descriptor(g), PASS if ok else FAIL, ok, None,
                          {"pairs": fit["pairs"], "bins": fit["bins"]})


def check_campanato_decay(w: SpaceTimeField, z_o: Point, lam: float, p: float, taus, mu: float = 0.0,
                          R_outer: float | None = None) -> EstimateReport:
    """Mean oscillation ``Phi(tau)`` of ``Dw`` on intrinsic cylinders; ``beta p`` is its log-log slope."""
    taus = sorted(float(t) for t in taus)
    if len(taus) < 2:
        raise InvalidArgument("need at least two radii")
    g = w.grid
    phis = []
    sup_grad = 0.0
    for tau in taus:
        Q = intrinsic_cylinder(z_o, tau, lam, p)
        _check_inside(Q, g)
        tidx, mask = select(w, Q)
        G = _gradients(w, tidx)[:, mask]
        if G.size == 0:
            raise InvalidArgument("empty cylinder")
        mean = G.reshape(-1, *G.shape[-2:]).mean(axis=0)
        phis.append(float((_fro(G - mean) ** p).mean()))
        sup_grad = max(sup_grad, float(np.sqrt(mu ** 2 + _fro(G) ** 2).max()))
    phis = np.array(phis)
    params = {"p": p, "lambda": lam, "taus": taus, "A_measured": sup_grad / lam}
    if phis.max() <= 1e-24:
        return EstimateReport("campanato_decay", "Campanato decay", float(phis.max()), 0.0, 0.0, {"beta": None},
                              params, grid_descriptor(g), SKIPPED, True, None, {"phi": phis.tolist()})
    pos = phis > 0
    slope = float(np.polyfit(np.log(np.array(taus)[pos]), np.log(phis[pos]), 1)[0]) if pos.sum() >= 2 else 0.0
    beta = slope / p
    ok = beta > 0
    return EstimateReport("campanato_decay", "Campanato decay", float(phis[0]), float(phis[-1]),
                          _ratio(phis[0], phis[-1]), {"beta": beta, "beta_p": slope}, params,
                          grid_descriptor(g), PASS if ok else FAIL, ok, 0.0, {"phi": phis.tolist()})


def check_moser_bound(u: SpaceTimeField, z_o: Point, R: float, S: float, sigma: float, eps: float,
                      mu: float, p: float, N: int | None = None, budget: float | None = None) -> EstimateReport:
    """Sup of ``|Du|`` on the shrunken cylinder against the scaling-deficit bound."""
    N = N or u.grid.d
    d = scaling_deficit(N, p)
    if not (0 < sigma < 1 and 0 < eps <= 1):
        raise InvalidArgument("need 0 < sigma < 1 and 0 < eps <= 1")
    outer = standard_cylinder(z_o, R, S)
    inner = standard_cylinder(z_o, sigma * R, sigma * S)
    _check_inside(outer, u.grid)
    to, mo = outer.nodes(u.grid)
    avg = float((_fro(_gradients(u, to))[:, mo] ** p).mean())
    ti, mi = select(u, inner)
    lhs = float(_fro(_gradients(u, ti))[:, mi].max())
    term1 = (eps ** (-(2.0 - p) * (N + 2)) * (R ** 2 / S) ** (N / 2.0) * (1 - sigma) ** (-(N + 2)) * avg) ** (d / p)
    terms = [term1, eps * mu]
    if p != 2:
        terms.append(eps * (S / R ** 2) ** (1.0 / (2.0 - p)))
    rhs = max(terms)
    return _constant_report("moser_bound", "gradient sup via scaling deficit", lhs, rhs, budget, u,
                            {"p": p, "mu": mu, "N": N, "R": R, "S": S, "sigma": sigma, "eps": eps},
                            {"d": d}, {"terms": terms, "grad_p_mean": avg})


# ----------------------------------------------------------------------------
# doubly non-linear estimates


def _u0_at(u: SpaceTimeField, z_o: Point, tol: float) -> float:
    u0 = float(_point_value(u, z_o)[0])
    if not u0 > tol:
        raise InvalidArgument(f"u(z_o) = {u0:.3g} is not positive")
    return u0


def empirical_harnack(u: SpaceTimeField, z_o: Point, rho: float, p: float, q: float,
                      tol: float = 1e-12) -> EstimateReport:
    """``max(sup_Q u / u0, u0 / inf_Q u)`` on the intrinsic cube cylinder (report only)."""
    u0 = _u0_at(u, z_o, tol)
    Q = dnl_intrinsic_cylinder(z_o, rho, u0, p, q)
    _check_inside(Q, u.grid)
    tidx, mask = Q.nodes(u.grid)
    vals = u.values[tidx][:, mask, 0]
    lo = float(vals.min())
    gamma = max(float(vals.max()) / u0, u0 / lo if lo > 0 else math.inf)
    return EstimateReport("harnack", "time-insensitive Harnack ratio", gamma, 1.0, gamma, {},
                          {"p": p, "q": q, "rho": rho, "u0": u0}, grid_descriptor(u.grid), REPORT, True)


def check_dnl_regularity(u: SpaceTimeField, z_o: Point, rho: float, p: float, q: float,
                         gamma_tilde: float = 8.0, budgets: dict | None = None, max_points: int = 3000,
                         seed: int = 0, tol: float = 1e-12) -> tuple:
    """Gradient, Lipschitz and gradient-Hoelder constants on the intrinsic cylinder of ``z_o``.

    Returns three reports ``(grad, lip, hol)``.  ``gamma_tilde`` sets the
    enlarged cylinder that must fit in the domain.
    """
    budgets = budgets or {}
    g = u.grid
    u0 = _u0_at(u, z_o, tol)
    big = dnl_intrinsic_cylinder(z_o, gamma_tilde * rho, u0, p, q)
    _check_inside(big, g, "enlarged intrinsic cylinder")
    Q = dnl_intrinsic_cylinder(z_o, rho, u0, p, q)
    tidx, mask = Q.nodes(g)
    G = _gradients(u, tidx)
    c_grad_lhs = float(_fro(G)[:, mask].max())
    params = {"p": p, "q": q, "rho": rho, "u0": u0, "gamma_tilde": gamma_tilde}
    rep_grad = _constant_report("dnl_gradient", "intrinsic gradient bound", c_grad_lhs, u0 / rho,
                                budgets.get("grad"), u, params)
    T = Q.duration
    full_grad = np.zeros((g.n_t, *g.shape, u.k * g.d))
    full_grad[tidx] = G.reshape(len(tidx), *g.shape, -1)
    xs, ts, (vals, grads) = _region_samples(u, (tidx, mask), [u.values[tidx], full_grad[tidx]],
                                            max_points, seed)
    xs_n, c = xs / rho, 1.0 / T
    gap = 2.0 * g.hmax / rho
    lip, n_lip = kernels.pair_quotient_max(np.ascontiguousarray(vals / u0), xs_n, ts, c, 1.0, gap)
    rep_lip = _constant_report("dnl_lipschitz", "intrinsic Lipschitz bound", lip, 1.0, budgets.get("lip"), u,
                               params, details={"pairs": n_lip})
    gvals = np.ascontiguousarray(grads * rho / u0)
    span = float(np.ptp(xs_n, axis=0).sum() + math.sqrt(c * np.ptp(ts)))
    fit = envelope_fit(gvals, xs_n, ts, c, gap, max(span, 1.01 * gap), 12, _roundoff_floor(gvals))
    a = fit["slope"]
    if a is None:
        hol, a_used = 0.0, None
    else:
        a_used = min(max(a, 1e-6), 1.0)
        hol, _ = kernels.pair_quotient_max(gvals, xs_n, ts, c, a_used, gap)
    rep_hol = _constant_report("dnl_gradient_holder", "intrinsic gradient Hoelder bound", float(hol), 1.0,
                               budgets.get("hol"), u, params, {"alpha_o": a},
                               {"pairs": fit["pairs"], "alpha_used": a_used})
    return rep_grad, rep_lip, rep_hol


def _box_distance(grid: Grid, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(min((x - np.asarray(grid.lower)).min(), (np.asarray(grid.upper) - x).min()))


def check_extinction_decay(u: SpaceTimeField, T_num: float, x_o, t_o: float, r: float, p: float, q: float,
                           alpha_o: float | None = None, budgets: dict | None = None) -> tuple:
    """Decay of ``u``, ``|grad u|`` and their oscillations before the extinction time.

    Returns four reports in the order value, gradient, oscillation of ``u``,
    oscillation of ``grad u``.  Distances to the boundary are measured in the
    solver's box.
    """
    budgets = budgets or {}
    if not (T_num / 2 < t_o < T_num):
        raise InvalidArgument("t_o must lie in (T/2, T)")
    g = u.grid
    d = _box_distance(g, x_o)
    if not d > 0:
        raise InvalidArgument("x_o must lie inside the domain")
    if not 0 < r < d:
        raise InvalidArgument("need 0 < r < dist(x_o, boundary)")
    j = g.time_index(t_o)
    kern = ((T_num - t_o) / d ** p) ** (1.0 / (q + 1.0 - p))
    idx = g.node_index(x_o)
    grad = _gradients(u, [j])[0]
    val = float(u.values[j][idx][0])
    gmag = float(_fro(grad)[idx])
    cube = np.abs(g.coords() - np.asarray(x_o, dtype=float)).max(axis=-1) <= r * (1 + 1e-12)
    osc_u = diameter(u.values[j][cube])
    osc_g = diameter(grad[cube].reshape(int(cube.sum()), -1))
    a = 1.0 if alpha_o is None else alpha_o
    params = {"p": p, "q": q, "T": T_num, "t_o": t_o, "r": r, "d": d, "alpha_o": a}
    pieces = [("extinction_value", val, kern), ("extinction_gradient", gmag, kern / d),
              ("extinction_osc", osc_u, (r / d) * kern), ("extinction_grad_osc", osc_g, (r / d) ** a * kern / d)]
    return tuple(_constant_report(n, "decay before extinction", lhs, rhs, budgets.get(n), u, params)
                 for n, lhs, rhs in pieces)


def check_compact_bounds(u: SpaceTimeField, K: Cylinder, p: float, q: float, domain: Cylinder | None = None,
                         budgets: dict | None = None, max_points: int = 3000, seed: int = 0) -> tuple:
    """Gradient sup and gradient Hoelder bounds on a compact set scaled by ``rho_o`` and ``M``.

    Returns ``(sup_report, holder_report)``.
    """
    budgets = budgets or {}
    g = u.grid
    domain = domain or box_domain(g)
    tidx, mask = select(u, K)
    pts = np.concatenate([np.broadcast_to(g.coords()[mask], (len(tidx), int(mask.sum()), g.d)).reshape(-1, g.d),
                          np.repeat(g.times()[tidx], int(mask.sum()))[:, None]], axis=1)
    rho_o, _ = par_boundary_distance(pts, domain, g.hmax / 2, g.dt, time_exponent=1.0 / p)
    if not rho_o > 0:
        raise InvalidArgument("K touches the parabolic boundary")
    M = max(1.0, float(u.values[tidx][:, mask].max()))
    G = _gradients(u, tidx)
    lhs = float(_fro(G)[:, mask].max())
    params = {"p": p, "q": q, "rho_o": rho_o, "M": M}
    rep_sup = _constant_report("compact_gradient", "gradient bound on compact sets", lhs,
                               M ** ((q + 1.0) / p) / rho_o, budgets.get("sup"), u, params)
    full = np.zeros((g.n_t, *g.shape, u.k * g.d))
    full[tidx] = G.reshape(len(tidx), *g.shape, -1)
    xs, ts, (gv,) = _region_samples(u, (tidx, mask), [full[tidx]], max_points, seed)
    scale_x = M ** ((q + 1.0 - p) / p) / rho_o
    c = 1.0 / rho_o ** p
    vals = np.ascontiguousarray(gv * rho_o / M ** ((q + 1.0) / p))
    xs_n = xs * scale_x
    gap = 2.0 * g.hmax * scale_x
    span = float(np.ptp(xs_n, axis=0).sum() + math.sqrt(c * np.ptp(ts)))
    fit = envelope_fit(vals, xs_n, ts, c, gap, max(span, 1.01 * gap), 12, _roundoff_floor(vals))
    a = fit["slope"]
    hol = 0.0
    if a is not None:
        hol, _ = kernels.pair_quotient_max(vals, xs_n, ts, c, min(max(a, 1e-6), 1.0), gap)
    rep_hol = _constant_report("compact_gradient_holder", "gradient Hoelder bound on compact sets", float(hol),
                               1.0, budgets.get("hol"), u, params, {"alpha_1": a}, {"pairs": fit["pairs"]})
    return rep_sup, rep_hol


__all__ = [
    "EstimateReport", "CSV_COLUMNS", "reports_to_json", "reports_to_csv", "report_from_dict",
    "grid_descriptor", "envelope_fit", "alpha_star", "scaling_deficit", "check_energy_estimate",
    "check_comparison_principle", "check_osc_comparison", "check_comparison_estimate", "bump",
    "check_gluing", "check_oscillation_lemma", "check_gradient_sup_bound", "fit_holder_exponent",
    "check_campanato_decay", "check_moser_bound", "empirical_harnack", "check_dnl_regularity",
    "check_extinction_decay", "check_compact_bounds", "default_upper_data",
]
