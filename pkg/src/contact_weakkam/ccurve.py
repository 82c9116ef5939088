"""The ergodic-constant curve theta -> c(theta): sampling, one-sided slopes,
the itemised derivative/measure report, and the shape of the admissible set."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .measures import (DiscreteMeasure, MeasureError, default_eps_ordinal,
                       enumerate_mather_measures, ordinal_classify)
from .model import LagrangianView, MechanicalContactHamiltonian, TorusGrid1D, VelocityGrid
from .weakkam import ProbeReport, SolverError, as_view, frozen_critical_value

TOL_SLOPE = 5e-2
DELTA_POS = 1e-2
TOL_CONVEX = 1e-3
TOL_MONO = 1e-3
TOL_METHODS = 2e-2


def worker_count() -> int:
    env = os.environ.get("CONTACT_WEAKKAM_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("CONTACT_WEAKKAM_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ScanGrids:
    """Grids used per theta: the LP runs on a coarse (x, v) lattice, the
    Lax-Oleinik growth rate on its own x grid."""
    lp_nodes: int = 64
    lp_m_nodes: int = 33
    lp_v_max: float = 2.0
    lo_nodes: int = 128
    lo_dt: float | None = None
    max_measures: int = 4


@dataclass(frozen=True)
class CCurveSample:
    theta: float
    c: float
    slope_left: float
    slope_right: float
    integral_duH: float
    ordinal_nonempty: bool
    method_gap: float
    robust_nonordinal: bool = False
    c_lp: float = float("nan")
    c_lo: float = float("nan")
    flags: tuple[str, ...] = ()
    measures: tuple[DiscreteMeasure, ...] = field(default=(), repr=False, compare=False)

    def row(self) -> tuple:
        return (self.theta, self.c, self.slope_left, self.slope_right, self.integral_duH,
                int(self.ordinal_nonempty), self.method_gap)


SCAN_COLUMNS = ("theta", "c", "slope_left", "slope_right", "integral_duH", "ordinal_nonempty", "method_gap")


def _one_theta(view: LagrangianView, theta: float, method: str, grids: ScanGrids) -> dict:
    period = view.hamiltonian.period
    out = {"theta": theta, "flags": [], "c_lp": np.nan, "c_lo": np.nan, "measures": ()}
    xg = TorusGrid1D(period, grids.lp_nodes)
    vg = VelocityGrid(grids.lp_v_max, grids.lp_m_nodes)
    lp_view = LagrangianView(view.hamiltonian, view.strategy, grids.lp_v_max, grids.lp_m_nodes)
    try:
        c_lp, measures = enumerate_mather_measures(lp_view, theta, xg, vg, grids.max_measures)
        out["c_lp"], out["measures"] = c_lp, tuple(measures)
    except (MeasureError, ValueError) as exc:
        out["flags"].append(f"lp_error:{exc}")
    if method in ("laxoleinik", "both"):
        try:
            out["c_lo"] = frozen_critical_value(view, theta, TorusGrid1D(period, grids.lo_nodes), grids.lo_dt)
        except (SolverError, ValueError) as exc:
            out["flags"].append(f"laxoleinik_error:{exc}")

    if out["measures"]:
        eps = default_eps_ordinal(lp_view, xg.h)
        reps = [ordinal_classify(mu, lp_view, theta, eps) for mu in out["measures"]]
        out["integral_duH"] = 0.0 - reps[0].integral_duL
        out["ordinal_nonempty"] = any(r.is_ordinal for r in reps)
        out["robust_nonordinal"] = all(abs(r.integral_duL) >= 10 * eps for r in reps)
    else:
        out["integral_duH"], out["ordinal_nonempty"], out["robust_nonordinal"] = np.nan, False, False
    return out


def scan(spec_or_view, theta_min: float, theta_max: float, n_samples: int, method: str = "lp",
         grids: ScanGrids = ScanGrids(), workers: int | None = None) -> list[CCurveSample]:
    """Sample c on a uniform theta grid; LP measures supply integral_duH and ordinality."""
    if not theta_min < theta_max:
        raise ValueError("need theta_min < theta_max")
    if n_samples < 5:
        raise ValueError("need at least 5 samples")
    if method not in ("lp", "laxoleinik", "both"):
        raise ValueError(f"unknown method {method!r}")
    view = as_view(spec_or_view)
    thetas = np.linspace(theta_min, theta_max, n_samples)
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(lambda t: _one_theta(view, float(t), method, grids), thetas))
    else:
        raw = [_one_theta(view, float(t), method, grids) for t in thetas]

    cs = []
    for r in raw:
        c = r["c_lo"] if method == "laxoleinik" else r["c_lp"]
        if method == "both" and not np.isfinite(c):
            c = r["c_lo"]
        cs.append(c)
    cs = np.array(cs, dtype=float)
    dtheta = np.diff(thetas)
    slopes = np.diff(cs) / dtheta
    samples = []
    for k, r in enumerate(raw):
        flags = list(r["flags"])
        gap = abs(r["c_lp"] - r["c_lo"]) if method == "both" else np.nan
        if method == "both" and not gap <= TOL_METHODS:
            flags.append("method_disagreement")
        left = slopes[k - 1] if k > 0 else np.nan
        right = slopes[k] if k < len(slopes) else np.nan
        if k > 0 and cs[k] < cs[k - 1] - TOL_MONO:
            flags.append("non_monotone")
        samples.append(CCurveSample(
            float(thetas[k]), float(cs[k]), float(left), float(right), float(r["integral_duH"]),
            bool(r["ordinal_nonempty"]), float(gap), bool(r["robust_nonordinal"]),
            float(r["c_lp"]), float(r["c_lo"]), tuple(flags), r["measures"]))
    return samples


# ---------------------------------------------------------------------------
# itemised derivative report


@dataclass(frozen=True)
class ItemCheck:
    item: str
    theta: float
    status: str  # pass | fail | n/a
    detail: str = ""


APPROXIMATE_ITEMS = ("5", "6", "7", "8")


@dataclass(frozen=True)
class H4Report:
    checks: tuple[ItemCheck, ...]

    def item(self, name: str) -> list[ItemCheck]:
        return [c for c in self.checks if c.item == name]

    def at(self, name: str, theta: float, tol: float = 1e-9) -> ItemCheck:
        for c in self.checks:
            if c.item == name and abs(c.theta - theta) <= tol:
                return c
        raise KeyError((name, theta))

    @property
    def failures(self) -> list[ItemCheck]:
        return [c for c in self.checks if c.status == "fail"]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for c in self.checks:
            d = out.setdefault(c.item, {"pass": 0, "fail": 0, "n/a": 0})
            d[c.status] += 1
        return out


def _reclassified(measures, theta, view) -> list[float]:
    """integral of dL/du at u = theta for measures computed at a neighbouring theta."""
    return [ordinal_classify(mu, view, theta).integral_duL for mu in measures]


def verify_h4(samples: list[CCurveSample], spec_or_view=None, tol_slope: float = TOL_SLOPE,
              delta_pos: float = DELTA_POS, lip_margin: float = 0.1) -> H4Report:
    """Per-sample pass/fail/n/a for items 1-8 and the min-C implication of the convex case.

    Items 5-8 compare measures at neighbouring samples (re-evaluated at the
    centre theta) as a stand-in for upper limits of Mather sets."""
    if len(samples) < 5:
        raise ValueError("need at least 5 samples")
    view = None if spec_or_view is None else as_view(spec_or_view)
    finite_duH = [abs(s.integral_duH) for s in samples if np.isfinite(s.integral_duH)]
    K = (max(finite_duH) if finite_duH else 0.0) + lip_margin
    checks: list[ItemCheck] = []
    add = lambda item, s, ok, detail="": checks.append(  # noqa: E731
        ItemCheck(item, s.theta, "n/a" if ok is None else ("pass" if ok else "fail"), detail))
    c_min = min(s.c for s in samples if np.isfinite(s.c))

    for k in range(1, len(samples) - 1):
        s, prev, nxt = samples[k], samples[k - 1], samples[k + 1]
        sl, sr = s.slope_left, s.slope_right
        # 1) local Lipschitz bound
        lip = max(abs(sl), abs(sr))
        add("1", s, bool(lip <= K), f"max slope {lip:.4g} vs K {K:.4g}")
        # 2) ordinal measures force a flat left derivative
        add("2", s, None if not s.ordinal_nonempty else bool(abs(sl) <= tol_slope), f"slope_left {sl:.4g}")
        # 3) no ordinal measure (robustly) forces strict increase
        applies = (not s.ordinal_nonempty) and s.robust_nonordinal
        add("3", s, None if not applies else bool(sr >= delta_pos), f"slope_right {sr:.4g}")
        # 4) derivative equals the measure integral where c looks differentiable
        if abs(sl - sr) <= tol_slope and np.isfinite(s.integral_duH):
            slope = 0.5 * (sl + sr)
            add("4", s, bool(abs(slope - s.integral_duH) <= tol_slope),
                f"slope {slope:.4g} vs integral {s.integral_duH:.4g}")
        else:
            add("4", s, None)
        # 5)-8) neighbour surrogates
        if view is not None:
            left_int = [abs(v) for v in _reclassified(prev.measures, s.theta, view)]
            right_int = [abs(v) for v in _reclassified(nxt.measures, s.theta, view)]
            eps = default_eps_ordinal(view, s.measures[0].x_grid.h) if s.measures else 1e-3
        else:
            left_int = right_int = []
            eps = 1e-3
        if abs(sl) <= tol_slope and left_int:
            add("5", s, bool(max(left_int) <= tol_slope), "left-neighbour measures ordinal at theta")
        else:
            add("5", s, None)
        add("6", s, None if not sl > delta_pos else bool(not s.ordinal_nonempty), f"slope_left {sl:.4g}")
        if abs(sr) <= tol_slope and s.measures and view is not None:
            own = [abs(v) for v in _reclassified(s.measures, s.theta, view)]
            add("7", s, bool(max(own) <= eps), "every face measure ordinal")
        else:
            add("7", s, None)
        if sr > delta_pos and right_int:
            add("8", s, bool(min(right_int) > eps), "right-neighbour measures non-ordinal at theta")
        else:
            add("8", s, None)
        # convex case: ordinal measures only at the bottom of the curve
        add("cor3", s, None if not s.ordinal_nonempty else bool(s.c - c_min <= 2 * TOL_METHODS),
            f"c - min c = {s.c - c_min:.4g}")
    return H4Report(tuple(checks))


# ---------------------------------------------------------------------------
# shape of the admissible set


def satisfies_h5prime(spec, n_samples: int = 9) -> bool:
    """Convexity of H in (p, u) jointly; exact for mechanical forms, sampled otherwise."""
    if isinstance(spec, MechanicalContactHamiltonian):
        return True
    xs = np.linspace(0, spec.period, n_samples, endpoint=False)
    ps = np.linspace(spec.p_nodes[1], spec.p_nodes[-2], n_samples)
    us = np.linspace(spec.u_nodes[1], spec.u_nodes[-2], n_samples)
    X, P, U = np.meshgrid(xs, ps, us, indexing="ij")
    dp = 0.5 * (ps[1] - ps[0])
    du = 0.5 * (us[1] - us[0])
    rng = np.random.default_rng(0)
    for _ in range(8):
        a, b = rng.uniform(-1, 1, 2)
        mid = spec.value(X, P, U)
        plus = spec.value(X, P + a * dp, U + b * du)
        minus = spec.value(X, P - a * dp, U - b * du)
        if np.min(plus + minus - 2 * mid) < -1e-6:
            return False
    return True


@dataclass(frozen=True)
class ShapeVerdict:
    shape: str  # point | closed_ray | open_ray | line | "closed_ray | open_ray undetermined"
    candidates: tuple[str, ...]
    c0: float
    attained: bool
    convexity_checked: bool
    convexity_defect: float
    convex_ok: bool
    notes: tuple[str, ...] = ()


def _saturated(thetas, cs, end: str, rel: float = 1e-3) -> bool:
    span = thetas[-1] - thetas[0]
    if end == "left":
        sel = thetas <= thetas[0] + 0.1 * span
    else:
        sel = thetas >= thetas[-1] - 0.1 * span
    seg = cs[sel]
    if len(seg) < 2:
        seg = cs[:2] if end == "left" else cs[-2:]
    return bool(seg.max() - seg.min() < rel * max(1.0, float(np.abs(seg).max())))


def midpoint_convexity_defect(cs: np.ndarray) -> float:
    """max over uniform triples of c_k - (c_{k-j} + c_{k+j}) / 2."""
    worst = -np.inf
    n = len(cs)
    for j in range(1, n // 2 + 1):
        d = cs[j:n - j] - 0.5 * (cs[:n - 2 * j] + cs[2 * j:])
        if d.size:
            worst = max(worst, float(d.max()))
    return worst


def classify_admissible_set(samples: list[CCurveSample], probe: ProbeReport | None = None,
                            spec=None, tol_convex: float = TOL_CONVEX) -> ShapeVerdict:
    """Read the shape of the admissible set (the image of c) off the sampled curve and the probe."""
    thetas = np.array([s.theta for s in samples])
    cs = np.array([s.c for s in samples])
    ok = np.isfinite(cs)
    thetas, cs = thetas[ok], cs[ok]
    left_sat, right_sat = _saturated(thetas, cs, "left"), _saturated(thetas, cs, "right")
    notes = []
    check_convex = spec is None or satisfies_h5prime(spec)
    defect = midpoint_convexity_defect(cs) if check_convex else float("nan")
    convex_ok = (not check_convex) or defect <= tol_convex
    c_left = float(cs[0])

    if left_sat and right_sat:
        return ShapeVerdict("point", ("point",), float(np.mean(cs)), True, check_convex, defect, convex_ok)
    if left_sat:
        attained = True
        if probe is not None and probe.status == "bracketed" and not probe.attained:
            notes.append("curve saturates but the probe did not reach the bracket top")
            return ShapeVerdict("closed_ray | open_ray undetermined", ("closed_ray", "open_ray"), c_left,
                                False, check_convex, defect, convex_ok, tuple(notes))
        return ShapeVerdict("closed_ray", ("closed_ray",), c_left, attained, check_convex, defect,
                            convex_ok, tuple(notes))
    if probe is None:
        notes.append("left end still decreasing and no probe supplied")
        return ShapeVerdict("open_ray | line undetermined", ("open_ray", "line"), float("-inf"),
                            False, check_convex, defect, convex_ok, tuple(notes))
    if probe.status == "all_admissible":
        return ShapeVerdict("line", ("line",), float("-inf"), False, check_convex, defect, convex_ok)
    if probe.status == "bracketed":
        shape = "closed_ray" if probe.attained else "open_ray"
        return ShapeVerdict(shape, (shape,), probe.inf_estimate, probe.attained, check_convex, defect,
                            convex_ok)
    notes.append(f"probe status {probe.status}")
    return ShapeVerdict("closed_ray | open_ray undetermined", ("closed_ray", "open_ray"), c_left,
                        False, check_convex, defect, convex_ok, tuple(notes))
