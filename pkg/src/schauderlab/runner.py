"""Turn a :class:`~schauderlab.config.Scenario` into solves, reports and output files."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dnl as D
from . import verify as V
from .config import ConfigError, Scenario
from .discrete import Discretization, SolverParams
from .errors import InvalidArgument
from .fieldio import load_field, save_field
from .fields import (SpaceTimeField, constant_coefficient, cylinder_mean, holder_bump,
                     mollify_coefficient)
from .geometry import (Cylinder, Grid, Point, box_domain, cylinder_points, par_boundary_distance,
                       standard_cylinder)
from .plaplace import PLaplaceProblem, freeze_coefficients, solve_cauchy_dirichlet

OUT_ENV = "SCHAUDERLAB_OUT"
DEFAULT_OUT = "schauderlab-out"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


@dataclass
class RunResult:
    scenario: Scenario
    reports: list
    fields: list = field(default_factory=list)
    levels: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [r for r in self.reports if r.gated and not r.passed]

    @property
    def not_met(self) -> list:
        return [r for r in self.reports if r.status == V.HYPOTHESIS]


# ----------------------------------------------------------------------------
# building blocks


def build_grid(sc: Scenario, level: int = 0) -> Grid:
    g = Grid(sc["grid.lower"], sc["grid.upper"], sc["grid.n"], sc["grid.t_end"], sc["grid.dt"],
             sc["grid.t_start"])
    return g.refine(level) if level else g


def check_refinable(sc: Scenario, levels: int):
    g = build_grid(sc)
    finest = max((m - 1) * 2 ** (levels - 1) + 1 for m in g.n)
    if levels < 1:
        raise ConfigError(sc.source, None, "study needs at least one level")
    if finest > sc["study.max_nodes"]:
        raise ConfigError(sc.source, None, f"{levels} levels need {finest} nodes per axis; "
                                           f"study.max_nodes is {sc['study.max_nodes']}")


def build_coefficient(sc: Scenario, grid: Grid):
    kind = sc["coefficient.kind"]
    if kind == "constant":
        return constant_coefficient(sc["coefficient.value"])
    center = sc["coefficient.center"] or tuple(0.5 * (a + b) for a, b in zip(grid.lower, grid.upper))
    if len(center) != grid.d:
        raise ConfigError(sc.source, None, "coefficient.center has the wrong dimension")
    eps = sc["coefficient.eps"] if kind == "mollified" else 0.0
    lo = tuple(a - eps for a in grid.lower)
    hi = tuple(b + eps for b in grid.upper)
    base = holder_bump(sc["coefficient.alpha"], center, sc["coefficient.amplitude"], (lo, hi))
    return mollify_coefficient(base, eps) if kind == "mollified" else base


def _expression(sc: Scenario, k: int | None):
    text = sc["data.expression"]
    parts = [s.strip() for s in text.split(";") if s.strip()]
    if k is not None:
        if len(parts) < k:
            raise ConfigError(sc.source, None, f"data.expression has {len(parts)} components; need {k}")
        parts = parts[:k]
    names = {n: getattr(np, n) for n in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh",
                                         "sinh", "cosh", "pi", "minimum", "maximum", "where")}
    try:
        code = [compile(p, "<data.expression>", "eval") for p in parts]
    except SyntaxError as exc:
        raise ConfigError(sc.source, None, f"data.expression does not parse: {exc.msg}") from None

    def f(x, t):
        env = dict(names, x=x[..., 0], y=x[..., 1] if x.shape[-1] > 1 else 0.0 * x[..., 0],
                   t=float(t), __builtins__={})
        return np.stack([np.broadcast_to(eval(c, env), x.shape[:-1]) for c in code], axis=-1).astype(float)

    return f


@dataclass
class Data:
    initial: object
    boundary: object
    exact: object = None
    zero_boundary: bool = False


def build_data(sc: Scenario, grid: Grid, k: int | None = None) -> Data:
    kind = sc["data.kind"]
    if kind == "expression":
        f = _expression(sc, k if sc.kind == "plaplace" else 1)
        return Data(lambda x: f(x, grid.t_start), f)
    if kind == "file":
        u = load_field(sc["data.file"])
        if u.grid.shape != grid.shape or u.grid.n_t != grid.n_t:
            raise ConfigError(sc.source, None, "data.file does not match the scenario grid")
        return Data(u.values[0], u.values)
    name = sc["data.oracle"]
    if name == "heat_sine":
        p = sc["problem.p"]
        if p != 2 or (sc.kind == "dnl" and sc["problem.q"] != 1) or (sc.kind == "plaplace" and (
                sc["problem.k"] != 1 or sc["coefficient.kind"] != "constant" or sc["coefficient.value"] != 1)):
            raise ConfigError(sc.source, None, "heat_sine needs the heat equation (p=2, a=1, k=1 or q=1)")
        rate = float(grid.d)

        def exact(x, t):
            return (np.exp(-rate * t) * np.prod(np.sin(x), axis=-1))[..., None]

        return Data(lambda x: exact(x, grid.t_start), exact, exact)
    if name == "dnl_critical":
        if sc.kind != "dnl" or grid.d != 2:
            raise ConfigError(sc.source, None, "dnl_critical needs a 2D dnl scenario")
        sol = D.explicit_critical(2, sc["problem.p"])
        if not math.isclose(sol.q, sc["problem.q"], rel_tol=1e-12):
            raise ConfigError(sc.source, None, f"dnl_critical needs q = {sol.q:g} for p = {sc['problem.p']:g}")
        c = sc["data.scale"]
        s = c ** (sc["problem.p"] - 1 - sc["problem.q"])

        def exact(x, t):
            return (c * sol.value(x, s * t))[..., None]

        return Data(lambda x: exact(x, grid.t_start), exact, exact)
    # sine_bump: product of half sine waves, zero lateral data
    lo, hi = np.asarray(grid.lower), np.asarray(grid.upper)

    def init(x):
        return np.prod(np.sin(np.pi * (x - lo) / (hi - lo)), axis=-1)[..., None]

    def bnd(x, t):
        v = init(x)
        v[grid_boundary(x, lo, hi)] = 0.0
        return v

    return Data(init, bnd, None, True)


def grid_boundary(x, lo, hi):
    tol = 1e-12 * float(np.max(hi - lo))
    return ((np.abs(x - lo) <= tol) | (np.abs(x - hi) <= tol)).any(axis=-1)


def solver_params(sc: Scenario) -> SolverParams:
    return SolverParams(newton_tol=sc["solver.newton_tol"], max_newton_iters=sc["solver.max_newton_iters"],
                        eps_reg=sc["solver.eps_reg"])


def build_problem(sc: Scenario, grid: Grid, k: int | None = None):
    if sc.kind == "plaplace":
        k = k or sc["problem.k"]
        data = build_data(sc, grid, k)
        pb = PLaplaceProblem(sc["problem.p"], sc["problem.mu"], k, build_coefficient(sc, grid), grid,
                             data.initial, data.boundary)
    else:
        data = build_data(sc, grid)
        pb = D.DNLProblem(sc["problem.p"], sc["problem.q"], grid, data.initial, data.boundary)
    return pb, data


def solve(sc: Scenario, grid: Grid, k: int | None = None):
    pb, data = build_problem(sc, grid, k)
    params = solver_params(sc)
    u = solve_cauchy_dirichlet(pb, params) if sc.kind == "plaplace" else D.solve_dnl(pb, params)
    return pb, data, u


# ----------------------------------------------------------------------------
# checkers


def _center(grid: Grid, given, t_default: float | None = None) -> Point:
    if given is None:
        x = tuple(0.5 * (a + b) for a, b in zip(grid.lower, grid.upper))
        return Point(x, grid.t_end if t_default is None else t_default)
    given = tuple(given)
    if len(given) != grid.d + 1:
        raise InvalidArgument(f"center needs {grid.d + 1} entries (x..., t)")
    return Point(given[:-1], given[-1])


def _oracle_error(sc, pb, data, u, prm, seed):
    if data.exact is None:
        raise InvalidArgument("oracle_error needs a closed-form oracle")
    g = u.grid
    x = g.coords()
    ex = np.stack([data.exact(x, t) for t in g.times()])
    err = np.abs(u.values - ex)
    scale = float(np.abs(ex).max()) if prm["relative"] else 1.0
    emax = float(err.max()) / scale
    l2 = float(np.sqrt((err ** 2).sum(axis=tuple(range(1, err.ndim))).max() * g.cell_volume))
    budget = prm["budget"]
    status = V.REPORT if budget is None else (V.PASS if emax <= budget else V.FAIL)
    return [V.EstimateReport("oracle_error", "closed-form oracle", emax, 1.0, emax, {},
                             {"relative": prm["relative"], "h": g.hmax}, V.grid_descriptor(g), status,
                             status != V.FAIL, budget, {"l2_max_in_time": l2})]


def _energy(sc, pb, data, u, prm, seed):
    z = _center(u.grid, prm["center"])
    outer = standard_cylinder(z, prm["outer_radius"], prm["outer_duration"])
    inner = standard_cylinder(z, prm["inner_radius"], prm["inner_duration"])
    xi = cylinder_mean(u, outer)
    return [V.check_energy_estimate(u, pb, inner, outer, xi, prm["budget"])]


def _frozen(pb, u, prm, params):
    z = _center(u.grid, prm["center"])
    Q = standard_cylinder(z, prm["radius"])
    w = solve_cauchy_dirichlet(freeze_coefficients(pb, z, Q, u), params)
    return z, Q, w


def _comparison_principle(sc, pb, data, u, prm, seed):
    _, Q, w = _frozen(pb, u, prm, solver_params(sc))
    return [V.check_comparison_principle(w, Q, tol=prm["tol"])]


def _osc_comparison(sc, pb, data, u, prm, seed):
    _, Q, w = _frozen(pb, u, prm, solver_params(sc))
    return [V.check_osc_comparison(u, w, Q, prm["tol"])]


def _comparison_estimate(sc, pb, data, u, prm, seed):
    z = _center(u.grid, prm["center"])
    return [V.check_comparison_estimate(u, pb, z, prm["radii"], solver_params(sc), prm["slack"])]


def _gluing(sc, pb, data, u, prm, seed):
    center = prm["center"] or tuple(0.5 * (a + b) for a, b in zip(u.grid.lower, u.grid.upper))
    return [V.check_gluing(u, pb, center, prm["radius"], prm["t1"], prm["t2"], prm["budget"])]


def _oscillation(sc, pb, data, u, prm, seed):
    Q = Cylinder(_center(u.grid, prm["center"]), prm["radius"], prm["duration"])
    return [V.check_oscillation_lemma(u, Q, pb.p, pb.mu, prm["budget"])]


def _gradient_sup_reports(u, pb, prm, seed):
    g = u.grid
    K = Cylinder(_center(g, prm["center"]), prm["radius"], prm["duration"])
    _, rho = par_boundary_distance(cylinder_points(g, K), box_domain(g))
    sup = V.check_gradient_sup_bound(u, K, rho, pb.mu, pb.p, budget=prm["budget"])
    lam = sup.details["lambda"]
    hol = V.fit_holder_exponent(u, K, lam, rho, pb.p, prm["max_points"], seed)
    return [sup, hol]


def _gradient_sup(sc, pb, data, u, prm, seed):
    return _gradient_sup_reports(u, pb, prm, seed)


def _campanato(sc, pb, data, u, prm, seed):
    z, Q, w = _frozen(pb, u, prm, solver_params(sc))
    tidx, mask = Q.nodes(w.grid)
    grads = V._gradients(w, tidx)[:, mask]
    lam = float(np.sqrt(pb.mu ** 2 + V._fro(grads) ** 2).max())
    if lam <= 0:
        lam = 1.0
    return [V.check_campanato_decay(w, z, lam, pb.p, prm["taus"], pb.mu)]


def _moser(sc, pb, data, u, prm, seed):
    z = _center(u.grid, prm["center"])
    return [V.check_moser_bound(u, z, prm["R"], prm["S"], prm["sigma"], prm["eps"], pb.mu, pb.p,
                                budget=prm["budget"])]


def _k_sweep(sc, pb, data, u, prm, seed):
    if "gradient_sup" not in sc.checks:
        raise InvalidArgument("k_sweep reuses the gradient_sup cylinder; list gradient_sup as well")
    gprm = sc.check_params("gradient_sup")
    out, consts = [], []
    for k in prm["ks"]:
        pk, _, uk = solve(sc, u.grid, k)
        sup = _gradient_sup_reports(uk, pk, dict(gprm, budget=None), seed)[0]
        sup.name = f"k_sweep_k{k}"
        sup.parameters["k"] = k
        out.append(sup)
        consts.append(sup.implied_constant)
    ks = np.array(prm["ks"], dtype=float)
    slope = float(np.polyfit(np.log(ks), np.log(consts), 1)[0]) if len(ks) > 1 and min(consts) > 0 else None
    out.append(V.EstimateReport("k_sweep_trend", "dependence on the number of components", max(consts),
                                min(consts), max(consts) / min(consts) if min(consts) > 0 else math.inf,
                                {"log_slope": slope}, {"ks": list(prm["ks"])}, V.grid_descriptor(u.grid)))
    return out


def _harnack(sc, pb, data, u, prm, seed):
    z = _center(u.grid, prm["center"], 0.5 * (u.grid.t_start + u.grid.t_end))
    return [V.empirical_harnack(u, z, prm["rho"], pb.p, pb.q)]


def _dnl_regularity(sc, pb, data, u, prm, seed):
    z = _center(u.grid, prm["center"], 0.5 * (u.grid.t_start + u.grid.t_end))
    budgets = {"grad": prm["budget_grad"], "lip": prm["budget_lip"], "hol": prm["budget_hol"]}
    return list(V.check_dnl_regularity(u, z, prm["rho"], pb.p, pb.q, prm["gamma_tilde"], budgets,
                                       prm["max_points"], seed))


def _extinction(sc, pb, data, u, prm, seed):
    if not data.zero_boundary:
        raise InvalidArgument("extinction checks need zero lateral data")
    g = u.grid
    N, p, q = g.d, pb.p, pb.q
    disc = Discretization(g)
    C = prm["sobolev_constant"] or D.sobolev_constant(N, p, q)
    measure = float(np.prod(np.subtract(g.upper, g.lower)))
    v0 = D.lq_norm_power(u.values[0], disc, q + 1)
    grad_p = D.grad_norm_power(u.values[0], disc, p)
    T_num = D.detect_extinction(u)
    rec = D.extinction_bounds(measure, v0 ** (1 / (q + 1)), grad_p ** (1 / p), N, p, q, C, T_num)
    params = {"p": p, "q": q, "N": N, "sobolev_constant": C, "measure": measure, "lambda_q1": rec.lambda_q1}
    grid = V.grid_descriptor(g)
    ok = T_num is not None and rec.T_lower <= T_num <= rec.T_upper
    out = [V.EstimateReport("extinction_sandwich", "extinction time bounds",
                            math.nan if T_num is None else T_num, rec.T_upper,
                            math.nan if T_num is None else T_num / rec.T_upper, {}, params, grid,
                            V.PASS if ok else V.FAIL, ok, None, {"T_lower": rec.T_lower, "T_upper": rec.T_upper})]
    norms = np.array([D.lq_norm_power(u.values[j], disc, q + 1) for j in range(g.n_t)])
    env = D.lq_envelope(g.times() - g.t_start, v0, D.envelope_rate(C, measure, N, p, q), p, q)
    excess = float((norms - env).max())
    ok = excess <= prm["envelope_tol"]
    out.append(V.EstimateReport("extinction_envelope", "L^(q+1) envelope", float(norms.max()), float(env.max()),
                                excess, {}, dict(params, tol=prm["envelope_tol"]), grid,
                                V.PASS if ok else V.FAIL, ok, prm["envelope_tol"],
                                {"largest_step_increase": float(np.diff(norms).max(initial=0.0))}))
    increase = float(np.diff(norms).max(initial=0.0))
    ok = increase <= 1e-12 * max(1.0, v0)
    out.append(V.EstimateReport("extinction_norm_decay", "monotone L^(q+1) norm", increase, v0, increase / v0,
                                {}, params, grid, V.PASS if ok else V.FAIL, ok, 1e-12))
    if T_num is None:
        return out
    x_o = prm["x_o"] or tuple(0.5 * (a + b) for a, b in zip(g.lower, g.upper))
    t_o = prm["t_fraction"] * T_num
    d = V._box_distance(g, x_o)
    r = prm["r"] or d / 4
    j = g.time_index(t_o)
    alpha = _local_alpha(u, j, x_o, r)
    budgets = {n: prm["budget"] for n in ("extinction_value", "extinction_gradient", "extinction_osc",
                                          "extinction_grad_osc")}
    out.extend(V.check_extinction_decay(u, T_num, x_o, t_o, r, p, q, alpha, budgets))
    return out


def _local_alpha(u: SpaceTimeField, j: int, x_o, r: float):
    g = u.grid
    cube = np.abs(g.coords() - np.asarray(x_o, dtype=float)).max(axis=-1) <= r
    grads = V._gradients(u, [j])[0][cube].reshape(int(cube.sum()), -1)
    xs = g.coords()[cube]
    if len(xs) < 4 or V.diameter(grads) <= 1e-10:
        return None
    fit = V.envelope_fit(grads, xs, np.zeros(len(xs)), 0.0, g.hmax * 0.999, 2 * r * math.sqrt(g.d), 8,
                         V._roundoff_floor(grads))
    a = fit["slope"]
    return None if a is None else min(max(a, 1e-3), 1.0)


def _compact(sc, pb, data, u, prm, seed):
    K = Cylinder(_center(u.grid, prm["center"]), prm["radius"], prm["duration"])
    budgets = {"sup": prm["budget"]}
    return list(V.check_compact_bounds(u, K, pb.p, pb.q, budgets=budgets, seed=seed))


CHECKERS = {
    "oracle_error": _oracle_error, "energy": _energy, "comparison_principle": _comparison_principle,
    "osc_comparison": _osc_comparison, "comparison_estimate": _comparison_estimate, "gluing": _gluing,
    "oscillation": _oscillation, "gradient_sup": _gradient_sup, "campanato": _campanato, "moser": _moser,
    "k_sweep": _k_sweep, "harnack": _harnack, "dnl_regularity": _dnl_regularity,
    "extinction": _extinction, "compact": _compact,
}


def run_checks(sc: Scenario, pb, data, u, seed: int = 0) -> list:
    reports = []
    for name in sc.checks:
        try:
            reports.extend(CHECKERS[name](sc, pb, data, u, sc.check_params(name), seed))
        except InvalidArgument as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(sc.source, None, f"checker {name!r}: {exc}") from None
    return reports


# ----------------------------------------------------------------------------
# entry points


def run(sc: Scenario, seed: int = 0, level: int = 0, checks: bool = True) -> RunResult:
    grid = build_grid(sc, level)
    pb, data, u = solve(sc, grid)
    reports = run_checks(sc, pb, data, u, seed) if checks else []
    for r in reports:
        r.parameters.setdefault("level", level)
    return RunResult(sc, reports, [u], [level] * len(reports))


def study(sc: Scenario, levels: int | None = None, seed: int = 0) -> RunResult:
    levels = levels or sc["study.levels"]
    check_refinable(sc, levels)
    per_level, fields, tags = [], [], []
    for lvl in range(levels):
        res = run(sc, seed, lvl)
        per_level.append(res.reports)
        fields.extend(res.fields)
    reports = [r for batch in per_level for r in batch]
    tags = [lvl for lvl, batch in enumerate(per_level) for _ in batch]
    if levels > 1:
        summary = _study_summary(sc, per_level, [f.grid for f in fields])
        reports.extend(summary)
        tags.extend([levels] * len(summary))
    return RunResult(sc, reports, fields, tags)


# rate checks assert exponents; their constants are recorded but never gated across levels
RATE_CHECKS = frozenset({"holder_exponent", "campanato_decay", "comparison_estimate"})


def _study_summary(sc: Scenario, per_level: list, grids: list) -> list:
    out = []
    hs = np.array([g.hmax for g in grids])
    errs = [next((r.lhs for r in batch if r.name == "oracle_error"), None) for batch in per_level]
    if all(e is not None and e > 0 for e in errs):
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        expected, tol = sc["study.expected_order"], sc["study.order_tol"]
        if expected is None:
            status, ok = V.REPORT, True
        else:
            ok = abs(slope - expected) <= tol
            status = V.PASS if ok else V.FAIL
        out.append(V.EstimateReport("convergence_order", "refinement study", errs[-1], errs[0], slope,
                                    {"spatial_order": slope}, {"h": hs.tolist(), "errors": errs,
                                                               "expected": expected, "tol": tol},
                                    V.grid_descriptor(grids[-1]), status, ok, expected))
    factor = sc["study.stability_factor"]
    names = [r.name for r in per_level[0] if r.name not in ("oracle_error",)]
    for name in names:
        series = [next((r.implied_constant for r in batch if r.name == name), None) for batch in per_level]
        if any(c is None or not math.isfinite(c) for c in series):
            continue
        if min(series) <= 1e-12:
            continue  # zero or roundoff-level quantities carry no scale
        ratio = max(max(a / b, b / a) for a, b in zip(series[:-1], series[1:]))
        if factor is None or name in RATE_CHECKS:
            status, ok = V.REPORT, True
        else:
            ok = ratio <= factor
            status = V.PASS if ok else V.FAIL
        out.append(V.EstimateReport(f"stability_{name}", "refinement stability", ratio, 1.0, ratio, {},
                                    {"series": series}, V.grid_descriptor(grids[-1]), status, ok, factor))
    return out


def write_outputs(result: RunResult, out_dir, fmt: str = "both") -> list:
    sc = result.scenario
    base = Path(out_dir) / sc.id
    base.mkdir(parents=True, exist_ok=True)
    written = []
    (base / "scenario.cfg").write_text(sc.to_text())
    written.append(base / "scenario.cfg")
    if fmt in ("json", "both"):
        path = base / "reports.json"
        entries = []
        for r, lvl in zip(result.reports, result.levels):
            d = r.to_dict()
            d["scenario"], d["level"] = sc.id, lvl
            entries.append(d)
        path.write_text(json.dumps(entries, indent=1, sort_keys=True) + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        path = base / "reports.csv"
        rows = V.reports_to_csv(result.reports, header=False).splitlines()
        lines = ["scenario,level," + ",".join(V.CSV_COLUMNS)]
        lines += [f"{sc.id},{lvl},{row}" for row, lvl in zip(rows, result.levels)]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if sc["output.fields"]:
        ext = sc["output.field_format"]
        for i, u in enumerate(result.fields):
            written.append(save_field(u, base / f"field_level{i}.{ext}", ext))
    return written


__all__ = ["RunResult", "build_grid", "build_problem", "build_data", "build_coefficient", "solve", "run",
           "study", "run_checks", "write_outputs", "default_out_dir", "CHECKERS", "OUT_ENV"]
