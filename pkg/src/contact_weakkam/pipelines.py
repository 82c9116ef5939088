"""Subcommand bodies. Each writes its CSVs into `out` and returns (report items, failed checks)."""
from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from . import csvio
from .ccurve import SCAN_COLUMNS, ScanGrids, classify_admissible_set, scan, verify_h4
from .closed_forms import example_fig2_gbranch, fig2_solutions, lambda_through, u_lambda_grid
from .config import RunConfig
from .flows import (PhasePoint, integrate_contact, integrate_contact_batch, integrate_el,
                    integrate_el_batch, mather_invariance_check)
from .measures import (DiscreteMeasure, compare_with_measures, default_eps_ordinal,
                       enumerate_mather_measures, ordinal_classify)
from .model import LagrangianView, TorusGrid1D, VelocityGrid, piecewise_example, pendulum_example
from .weakkam import (GridFunction, admissible_interval_probe, default_dt, residual,
                      solve_stationary)


FIG1_LAMBDAS = (0.0, 0.25, 0.5, 1.0)
RESIDUAL_TARGET = 0.05


class Checks:
    """Collects named pass/fail results in order."""

    def __init__(self):
        self.items: list[tuple[str, bool]] = []

    def __call__(self, name: str, ok) -> bool:
        self.items.append((name, bool(ok)))
        return bool(ok)

    @property
    def failed(self) -> list[str]:
        return [n for n, ok in self.items if not ok]

    def to_report(self) -> dict:
        return {f"check.{n}": ok for n, ok in self.items}


def _view(cfg: RunConfig, spec=None) -> LagrangianView:
    spec = spec or cfg.build_spec()
    return LagrangianView(spec, "closed_form", cfg.grid.v_max, cfg.grid.m_nodes)


def _lp_view(cfg: RunConfig, spec) -> LagrangianView:
    return LagrangianView(spec, "closed_form", cfg.measure.lp_v_max, cfg.measure.lp_m_nodes)


def _lp_grids(cfg: RunConfig, period: float) -> tuple[TorusGrid1D, VelocityGrid]:
    # keep the LP spacing of the unit circle on longer circles
    n = int(round(cfg.measure.lp_nodes * period))
    return TorusGrid1D(period, n), VelocityGrid(cfg.measure.lp_v_max, cfg.measure.lp_m_nodes)


def _measure_items(prefix: str, mu: DiscreteMeasure, rep) -> dict:
    sup = mu.support(1e-9)
    heavy = max(sup, key=lambda s: s[2])
    return {f"{prefix}.integral_duL": rep.integral_duL, f"{prefix}.ordinal": rep.is_ordinal,
            f"{prefix}.support_size": len(sup), f"{prefix}.heaviest_x": heavy[0], f"{prefix}.heaviest_v": heavy[1],
            f"{prefix}.heaviest_mass": heavy[2]}


# ---------------------------------------------------------------------------


def run_solve(cfg: RunConfig, out: Path, c: float, init: str) -> tuple[dict, list[str]]:
    view = _view(cfg)
    grid = TorusGrid1D(cfg.period, cfg.grid.n_nodes)
    if init.startswith("const:"):
        u0 = GridFunction.constant(grid, float(init[6:]))
    elif init.startswith("file:"):
        u0 = csvio.read_solution(init[5:], cfg.period)
        grid = u0.grid
    else:
        raise ValueError(f"--init must be const:K or file:PATH, got {init!r}")
    dt = cfg.solver.dt or default_dt(grid, view.v_max)
    sol, rep = solve_stationary(view, c, u0, dt, cfg.solver.tol_fix, cfg.solver.max_iter)
    checks = Checks()
    items = {"command": "solve", "hamiltonian": view.hamiltonian.name, "c": c, "n_nodes": grid.n_nodes,
             **{f"solve.{k}": v for k, v in rep.as_dict().items()}}
    if rep.status == "diverged":
        items["finding"] = "diverged: c lies below the admissible set"
    else:
        checks("fixed_point_reached", rep.converged)
    if rep.converged:
        res = residual(sol, c, view.hamiltonian)
        csvio.write_solution(out / "solution.csv", sol, res)
        items["lip"] = sol.lip
        items["kinks"] = int(res.kinks.sum())
        checks("velocity_grid_covers_lipschitz_bound", sol.lip < view.v_max)
    items.update(checks.to_report())
    return items, checks.failed


def run_scan(cfg: RunConfig, out: Path) -> tuple[dict, list[str]]:
    spec = cfg.build_spec()
    sc = cfg.scan
    grids = ScanGrids(lp_nodes=int(round(cfg.measure.lp_nodes * cfg.period)), lp_m_nodes=cfg.measure.lp_m_nodes,
                      lp_v_max=cfg.measure.lp_v_max)
    samples = scan(spec, sc.theta_min, sc.theta_max, sc.n_samples, sc.method, grids)
    csvio.write_table(out / "scan.csv", SCAN_COLUMNS, [s.row() for s in samples])
    report = verify_h4(samples, spec)
    csvio.write_table(out / "h4_items.csv", ("item", "theta", "status"),
                      [(c.item, c.theta, c.status) for c in report.checks])
    cs = [s.c for s in samples if np.isfinite(s.c)]
    probe = admissible_interval_probe(spec, min(cs) - 1.0, min(cs) + 1.0)
    shape = classify_admissible_set(samples, probe, spec)
    checks = Checks()
    checks("no_flagged_samples", not any(s.flags for s in samples))
    checks("h4_items", report.passed)
    checks("convexity", shape.convex_ok)
    items = {"command": "scan-c", "hamiltonian": spec.name, "method": sc.method, "n_samples": sc.n_samples,
             "shape": shape.shape, "c0": shape.c0, "attained": shape.attained,
             "convexity_defect": shape.convexity_defect, "probe.status": probe.status,
             "probe.lo": probe.lo, "probe.hi": probe.hi}
    for item, counts in report.summary().items():
        items[f"h4.item{item}"] = f"pass:{counts['pass']} fail:{counts['fail']} n/a:{counts['n/a']}"
    items["h4.approximate_items"] = "5,6,7,8"
    for s in samples:
        for f in s.flags:
            items[f"flag.theta_{s.theta:.6g}"] = f
    items.update(checks.to_report())
    return items, checks.failed


def run_mather(cfg: RunConfig, out: Path, theta: float, enumerate_k: int = 1) -> tuple[dict, list[str]]:
    spec = cfg.build_spec()
    view = _lp_view(cfg, spec)
    xg, vg = _lp_grids(cfg, cfg.period)
    c, measures = enumerate_mather_measures(view, theta, xg, vg, max_measures=max(1, enumerate_k))
    eps = cfg.measure.eps_ordinal or default_eps_ordinal(view, xg.h)
    items = {"command": "mather", "hamiltonian": spec.name, "theta": theta, "critical_value": c,
             "n_measures": len(measures), "eps_ordinal": eps}
    checks = Checks()
    for k, mu in enumerate(measures):
        csvio.write_measure(out / f"measure_{k}.csv", mu)
        rep = ordinal_classify(mu, view, theta, eps)
        items.update(_measure_items(f"measure{k}", mu, rep))
        checks(f"measure{k}_closed", mu.closedness_residual() <= cfg.measure.tol_closed)
        checks(f"measure{k}_mass", abs(mu.masses.sum() - 1.0) <= 1e-9)
    items["ordinal_nonempty"] = any(items[f"measure{k}.ordinal"] for k in range(len(measures)))
    items.update(checks.to_report())
    return items, checks.failed


def run_compare(cfg: RunConfig, out: Path, u1_path: str, u2_path: str, theta: float) -> tuple[dict, list[str]]:
    spec = cfg.build_spec()
    u1 = csvio.read_solution(u1_path, cfg.period)
    u2 = csvio.read_solution(u2_path, cfg.period)
    view = _lp_view(cfg, spec)
    xg, vg = _lp_grids(cfg, cfg.period)
    _, measures = enumerate_mather_measures(view, theta, xg, vg, max_measures=4)
    eps = cfg.measure.eps_ordinal or default_eps_ordinal(view, xg.h)
    ordinal = [mu for mu in measures if ordinal_classify(mu, view, theta, eps).is_ordinal]
    dt = cfg.solver.dt or default_dt(u1.grid, cfg.grid.v_max)
    verdict = compare_with_measures(u1, u2, ordinal, dt)
    checks = Checks()
    checks("comparison_consistent", verdict.consistent)
    items = {"command": "compare", "theta": theta, "n_ordinal_measures": len(ordinal),
             **{f"verdict.{k}": v for k, v in verdict.as_dict().items()}}
    for k, mu in enumerate(ordinal):
        csvio.write_measure(out / f"ordinal_measure_{k}.csv", mu)
    items.update(checks.to_report())
    return items, checks.failed


def conjugacy_deviation(view, x1, p1, u1, x2, v2, u2) -> float:
    """Distance between a Hamiltonian orbit and the Legendre image of a Lagrangian one."""
    period = view.hamiltonian.period
    dx = np.abs(np.mod(x1, period) - np.mod(x2, period))
    p2 = view.dv(x2, v2, u2)
    return float(max(np.minimum(dx, period - dx).max(), np.abs(p1 - p2).max(), np.abs(u1 - u2).max()))


def batch_conjugacy(view, c: float, T: float, dt: float, seed: int, n_starts: int = 20) -> float:
    """Largest conjugacy deviation over random starts with |p| <= 1 and |u| <= 1."""
    spec = view.hamiltonian
    rng = np.random.default_rng(seed)
    starts = np.stack([rng.uniform(0, spec.period, n_starts), rng.uniform(-1, 1, n_starts),
                       rng.uniform(-1, 1, n_starts)])
    ham, blew_h = integrate_contact_batch(spec, c, starts, T, dt)
    v0 = spec.partials(starts[0], starts[1], starts[2])[0]
    lag, blew_l = integrate_el_batch(view, c, np.stack([starts[0], v0, starts[2]]), T, dt)
    if blew_h or blew_l:
        return float("inf")
    return conjugacy_deviation(view, ham[:, 0], ham[:, 1], ham[:, 2], lag[:, 0], lag[:, 1], lag[:, 2])


def run_flow(cfg: RunConfig, out: Path, start: tuple[float, float, float], T: float, c: float = 0.0,
             seed: int = 0) -> tuple[dict, list[str]]:
    spec = cfg.build_spec()
    view = _view(cfg, spec)
    dt = cfg.solver.flow_dt
    x, p, u = start
    tr = integrate_contact(spec, c, PhasePoint(x, p, u), T, dt)
    csvio.write_trajectory(out / "trajectory.csv", tr)
    v = float(spec.partials(x, p, u)[0])
    el = integrate_el(view, c, PhasePoint(x, v, u), T, dt)
    csvio.write_trajectory(out / "trajectory_el.csv", el)
    checks = Checks()
    conj = float("nan")
    if not (tr.blew_up or el.blew_up):
        conj = conjugacy_deviation(view, tr.x, tr.y, tr.u, el.x, el.y, el.u)
        checks("legendre_conjugacy", conj <= 1e-6)
    batch = batch_conjugacy(view, c, min(T, 10.0), dt, seed)
    checks("legendre_conjugacy_random_starts", batch <= 1e-6)
    items = {"command": "flow", "hamiltonian": spec.name, "c": c, "T": T, "dt": dt, "steps": len(tr) - 1,
             "blew_up": tr.blew_up, "end.x": tr.end.x, "end.p": tr.end.y, "end.u": tr.end.u,
             "H_start": float(tr.H[0]), "H_end": float(tr.H[-1]), "conjugacy_deviation": conj,
             "conjugacy_random_starts": batch, "seed": seed}
    items.update(checks.to_report())
    return items, checks.failed


# ---------------------------------------------------------------------------
# the two worked examples


def run_fig1(cfg: RunConfig, out: Path) -> tuple[dict, list[str]]:
    H = pendulum_example()
    grid = TorusGrid1D(1.0, cfg.grid.n_nodes)
    checks = Checks()
    items: dict = {"command": "example", "name": "fig1", "hamiltonian": H.name, "n_nodes": grid.n_nodes}
    family = {}
    for lam in FIG1_LAMBDAS:
        u = u_lambda_grid(grid, lam)
        res = residual(u, 0.0, H)
        family[lam] = u
        csvio.write_solution(out / f"u_lambda_{lam:g}.csv", u, res)
        items[f"lambda_{lam:g}.residual_linf"] = res.linf
        items[f"lambda_{lam:g}.kinks"] = " ".join(f"{x:.6g}" for x in res.kink_positions) or "none"
        checks(f"residual_lambda_{lam:g}", res.linf <= RESIDUAL_TARGET)
    for a, b in itertools.combinations(FIG1_LAMBDAS, 2):
        # larger lambda lies below
        checks(f"order_{b:g}_below_{a:g}", np.all(family[b].values <= family[a].values))

    view = _lp_view(cfg, H)
    xg, vg = _lp_grids(cfg, 1.0)
    c0, measures = enumerate_mather_measures(view, 0.0, xg, vg, max_measures=4)
    eps = cfg.measure.eps_ordinal or default_eps_ordinal(view, xg.h)
    reps = [ordinal_classify(mu, view, 0.0, eps) for mu in measures]
    ordinal = [mu for mu, r in zip(measures, reps) if r.is_ordinal]
    csvio.write_measure(out / "mather_theta0.csv", measures[0])
    items["critical_value_theta0"] = c0
    items.update(_measure_items("measure0", measures[0], reps[0]))
    checks("critical_value_zero", abs(c0) <= 1e-2)
    checks("mass_at_origin", measures[0].mass_near(0.0, 0.0) >= 0.99)
    checks("origin_ordinal", reps[0].is_ordinal)

    for a, b in itertools.permutations(FIG1_LAMBDAS, 2):
        if b <= a:
            continue
        v = compare_with_measures(family[b], family[a], ordinal)
        items[f"compare.lambda_{b:g}_vs_{a:g}"] = (
            f"hypothesis={v.hypothesis_holds} conclusion={v.conclusion_holds}")
        checks(f"compare_{b:g}_{a:g}", v.hypothesis_holds and v.conclusion_holds)

    dt = cfg.solver.dt or default_dt(grid, cfg.grid.v_max)
    sol, rep = solve_stationary(_view(cfg, H), 0.0, GridFunction.constant(grid, 0.0), dt,
                                cfg.solver.tol_fix, cfg.solver.max_iter)
    lam_sel = lambda_through(float(sol.values[0]))
    err = sol.sup_distance(u_lambda_grid(grid, lam_sel))
    res = residual(sol, 0.0, H)
    csvio.write_solution(out / "solver_from_zero.csv", sol, res)
    items.update({"solver.status": rep.status, "solver.iterations": rep.iterations,
                  "solver.selected_lambda": lam_sel, "solver.sup_error_to_family": err})
    checks("solver_converged", rep.converged)
    checks("solver_on_family", err <= 1e-2)

    inv = mather_invariance_check(sol, 0.0, measures[0], 100.0, 1e-2, H)
    items["invariance.deviation"] = inv.deviation
    checks("invariance_origin", inv.deviation <= 1e-6)
    items.update(checks.to_report())
    return items, checks.failed


def run_fig2(cfg: RunConfig, out: Path) -> tuple[dict, list[str]]:
    P = piecewise_example()
    grid = TorusGrid1D(2.0, 2 * cfg.grid.n_nodes)
    checks = Checks()
    items: dict = {"command": "example", "name": "fig2", "hamiltonian": P.name, "n_nodes": grid.n_nodes,
                   "note.g2_branch": "g2 taken as the negative square-root branch; the displayed ODEs for g1 "
                                     "and g2 coincide, the sign choice is an interpretation"}
    for branch in ("plus", "minus"):
        g = example_fig2_gbranch(branch)
        csvio.write_table(out / f"g_{branch}.csv", ("x", "g"), zip(g.x, g.g))
        items[f"g_{branch}.k"] = g.k
        items[f"g_{branch}.at_half"] = float(g(0.5))
        items[f"g_{branch}.clamped_steps"] = g.clamped_steps
    u1, u2 = fig2_solutions(grid)
    for name, u in (("u1", u1), ("u2", u2)):
        res = residual(u, 0.0, P)
        csvio.write_solution(out / f"{name}.csv", u, res)
        items[f"{name}.residual_linf"] = res.linf
        checks(f"residual_{name}", res.linf <= RESIDUAL_TARGET)
    dist = u1.sup_distance(u2)
    items["sup_distance_u1_u2"] = dist
    checks("two_distinct_solutions", dist > 0.1)

    view = _lp_view(cfg, P)
    xg, vg = _lp_grids(cfg, 2.0)
    c0, measures = enumerate_mather_measures(view, 0.0, xg, vg, max_measures=4)
    eps = cfg.measure.eps_ordinal or default_eps_ordinal(view, xg.h)
    items["critical_value_theta0"] = c0
    items["n_measures"] = len(measures)
    at0 = [mu for mu in measures if mu.mass_near(0.0, 0.0) >= 0.99]
    at1 = [mu for mu in measures if mu.mass_near(1.0, 0.0) >= 0.99]
    checks("measure_at_origin", bool(at0))
    checks("measure_at_one", bool(at1))
    for k, mu in enumerate(measures):
        csvio.write_measure(out / f"mather_theta0_{k}.csv", mu)
        items.update(_measure_items(f"measure{k}", mu, ordinal_classify(mu, view, 0.0, eps)))
    ordinal = [mu for mu in measures if ordinal_classify(mu, view, 0.0, eps).is_ordinal]
    if at0:
        checks("origin_ordinal", ordinal_classify(at0[0], view, 0.0, eps).is_ordinal)
    if at1:
        r1 = ordinal_classify(at1[0], view, 0.0, eps)
        items["one.integral_duL"] = r1.integral_duL
        checks("one_not_ordinal", (not r1.is_ordinal) and abs(r1.integral_duL + 2.0) <= 0.05)

    v12 = compare_with_measures(u1, u2, ordinal)
    v21 = compare_with_measures(u2, u1, ordinal)
    items["compare.u1_vs_u2"] = f"hypothesis={v12.hypothesis_holds} conclusion={v12.conclusion_holds}"
    items["compare.u2_vs_u1"] = f"hypothesis={v21.hypothesis_holds} conclusion={v21.conclusion_holds}"
    checks("compare_u1_u2", v12.hypothesis_holds and v12.conclusion_holds)
    checks("compare_u2_u1_consistent", v21.consistent)

    if at1:
        inv = mather_invariance_check(u1, 0.0, at1[0], 100.0, 1e-2, P)
        items["invariance.deviation_one"] = inv.deviation
        checks("invariance_one", inv.deviation <= 1e-4)
    items.update(checks.to_report())
    return items, checks.failed
