"""Discrete Lax-Oleinik dynamic programming on the circle.

The one-step operator moves between grid nodes only:

    T[u](x_i) = min_{|k| <= K} u(y) + dt * (L(y, k h / dt, u(y)) + c),   y = x_i - k h,

with the u-argument of L frozen at the departure node. K = floor(dt * v_max / h).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import LagrangianView, ModelError, TorusGrid1D

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e6
DEFAULT_STENCIL = 12


class SolverError(RuntimeError):
    pass


class PreconditionError(SolverError):
    pass


class NeedsMoreIterations(SolverError):
    pass


def default_dt(grid: TorusGrid1D, v_max: float, stencil: int = DEFAULT_STENCIL) -> float:
    """Time step giving a stencil of `stencil` nodes on each side at speed v_max."""
    return stencil * grid.h / v_max


def as_view(spec_or_view, v_max: float = 4.0) -> LagrangianView:
    if isinstance(spec_or_view, LagrangianView):
        return spec_or_view
    strategy = "closed_form" if spec_or_view.kind == "mechanical_contact" else "numeric"
    return LagrangianView(spec_or_view, strategy=strategy, v_max=v_max)


@dataclass(frozen=True)
class GridFunction:
    grid: TorusGrid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise ModelError(f"expected {self.grid.n_nodes} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ModelError("GridFunction values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: TorusGrid1D, fn) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def constant(cls, grid: TorusGrid1D, k: float) -> "GridFunction":
        return cls(grid, np.full(grid.n_nodes, float(k)))

    @property
    def lip(self) -> float:
        return float(np.abs(np.diff(np.append(self.values, self.values[0]))).max() / self.grid.h)

    def __call__(self, x):
        return self.grid.interpolate(self.values, x)

    def sup_distance(self, other: "GridFunction") -> float:
        if other.grid != self.grid:
            raise PreconditionError("grid mismatch")
        return float(np.abs(self.values - other.values).max())


# ---------------------------------------------------------------------------
# operator


class LaxOleinikOperator:
    """Precomputed stencil for T; `apply` is vectorised across nodes."""

    def __init__(self, view: LagrangianView, grid: TorusGrid1D, dt: float, c: float = 0.0,
                 frozen_u: float | None = None):
        if grid.period != view.hamiltonian.period:
            raise ModelError("grid period differs from the Hamiltonian period")
        self.view, self.grid, self.dt, self.c = view, grid, float(dt), float(c)
        self.frozen_u = frozen_u
        K = int(np.floor(dt * view.v_max / grid.h + 1e-9))
        if K < 1:
            raise PreconditionError(
                f"dt*v_max={dt * view.v_max:.3g} < h={grid.h:.3g}: no neighbour reachable"
            )
        if frozen_u is None:
            du_sup = view.du_sup()
            if dt * du_sup > 1.0 + 1e-12:
                raise PreconditionError(f"CFL violated: dt*sup|dL/du| = {dt * du_sup:.3g} > 1")
        self.K = K
        self.shifts = np.arange(-K, K + 1)
        N = grid.n_nodes
        self.departure = (np.arange(N)[:, None] - self.shifts[None, :]) % N
        y = grid.nodes[self.departure]
        v = np.broadcast_to(self.shifts * grid.h / dt, y.shape)
        self._y, self._v = y, v
        H = view.hamiltonian
        if view.closed_form:
            # L = v^2/2 - V(y) - alpha(y) f(u): affine in f(u)
            self._base = dt * (0.5 * v * v - H.V(y) + self.c)
            self._coef = dt * H.alpha(y)
            self._u0 = H.u0
            if frozen_u is not None:
                self._base = self._base - self._coef * (frozen_u - self._u0)
                self._coef = np.zeros_like(self._coef)
        elif frozen_u is not None:
            self._base = dt * (view.value(y, v, frozen_u) + self.c)
            self._coef = None
        else:
            self._base = None

    def candidates(self, values: np.ndarray) -> np.ndarray:
        uy = values[self.departure]
        if self._base is None:
            return uy + self.dt * (self.view.value(self._y, self._v, uy) + self.c)
        if self._coef is None:
            return uy + self._base
        return uy + self._base - self._coef * (uy - self._u0)

    def apply(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cand = self.candidates(values)
        k = np.argmin(cand, axis=1)
        return cand[np.arange(cand.shape[0]), k], k

    def departure_node(self, i: int, k: int) -> int:
        return int(self.departure[i, k])


def lax_oleinik_step(u: GridFunction, c: float, dt: float, view: LagrangianView):
    """One application of T. Returns (T[u], argmin stencil index per node)."""
    op = LaxOleinikOperator(view, u.grid, dt, c)
    vals, k = op.apply(u.values)
    return GridFunction(u.grid, vals), k


# ---------------------------------------------------------------------------
# stationary solve


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    sup_update: float
    drift_rate: float
    residual_linf: float
    status: str  # converged | diverged | max_iter
    residual_constant: float = float("nan")
    h: float = float("nan")
    dt: float = float("nan")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _drift(means: list[float], dt: float) -> float:
    n = len(means)
    if n < 2:
        return 0.0
    start = min(n - 2, (3 * (n - 1)) // 4)
    return (means[-1] - means[start]) / ((n - 1 - start) * dt)


def solve_stationary(spec_or_view, c: float, init: GridFunction, dt: float | None = None,
                     tol_fix: float = 1e-8, max_iter: int = 200_000, steady_drift_exit: bool = True,
                     window: int | None = None, drift_tol: float = 1e-6):
    """Iterate T from `init` until the sup-norm update drops below tol_fix.

    Besides the 1e6 blow-up bound, a run whose mean drifts downward at a
    constant rate over four consecutive windows is reported as diverged
    (``steady_drift_exit``); that pattern cannot end in a fixed point."""
    view = as_view(spec_or_view)
    grid = init.grid
    dt = default_dt(grid, view.v_max) if dt is None else dt
    op = LaxOleinikOperator(view, grid, dt, c)
    u = np.array(init.values)
    means = [float(u.mean())]
    window = window or max(200, int(np.ceil(5.0 / dt)))
    rates: list[float] = []
    status, sup_update, it = "max_iter", float("inf"), 0
    for it in range(1, int(max_iter) + 1):
        un, _ = op.apply(u)
        sup_update = float(np.abs(un - u).max())
        u = un
        means.append(float(u.mean()))
        if sup_update <= tol_fix:
            status = "converged"
            break
        if np.abs(u).max() > DIVERGENCE_BOUND:
            status = "diverged"
            break
        if steady_drift_exit and it % window == 0:
            rates.append((means[-1] - means[-1 - window]) / (window * dt))
            last = rates[-4:]
            if len(last) == 4 and max(last) < -drift_tol:
                spread = max(last) - min(last)
                if spread <= 1e-3 * abs(np.mean(last)):
                    status = "diverged"
                    break
    drift = _drift(means, dt)
    sol = GridFunction(grid, u) if np.all(np.isfinite(u)) else init
    res = residual(sol, c, view.hamiltonian)
    report = SolveReport(
        converged=status == "converged",
        iterations=it,
        sup_update=sup_update,
        drift_rate=drift,
        residual_linf=res.linf,
        status=status,
        residual_constant=res.linf / (grid.h + dt),
        h=grid.h,
        dt=dt,
    )
    log.debug("solve_stationary c=%g: %s after %d iterations (drift %.3g)", c, status, it, drift)
    return sol, report


def explore_solutions(spec_or_view, c: float, grid: TorusGrid1D, kappas, dt: float | None = None,
                      tol_fix: float = 1e-8, max_iter: int = 200_000):
    """Fixed points reached from constant initial data u = kappa; near-duplicates merged."""
    found: list[GridFunction] = []
    reports: list[SolveReport] = []
    for kappa in kappas:
        sol, rep = solve_stationary(spec_or_view, c, GridFunction.constant(grid, kappa), dt,
                                    tol_fix, max_iter)
        if not rep.converged:
            continue
        if all(sol.sup_distance(f) > 10 * tol_fix for f in found):
            found.append(sol)
            reports.append(rep)
    return found, reports


# ---------------------------------------------------------------------------
# critical values


def frozen_critical_value(spec_or_view, theta: float, grid: TorusGrid1D, dt: float | None = None,
                          n_iter: int = 4000, stab_tol: float = 1e-3) -> float:
    """c(theta) as minus the asymptotic growth rate of the c = 0 iteration with u frozen at theta."""
    view = as_view(spec_or_view)
    dt = default_dt(grid, view.v_max) if dt is None else dt
    op = LaxOleinikOperator(view, grid, dt, 0.0, frozen_u=theta)
    u = np.zeros(grid.n_nodes)
    half = None
    for n in range(1, n_iter + 1):
        u, _ = op.apply(u)
        if n == n_iter // 2:
            half = u.copy()
        if np.abs(u).max() > 1e12:
            # renormalise; only differences matter for the rate
            raise NeedsMoreIterations("iterate left float range; reduce n_iter or dt")
    span = (n_iter - n_iter // 2) * dt
    rates = (u - half) / span
    if rates.max() - rates.min() > stab_tol * max(1.0, abs(float(rates.mean()))):
        raise NeedsMoreIterations(
            f"growth rates not yet uniform (spread {rates.max() - rates.min():.3g}); raise n_iter"
        )
    return -float(rates.mean())


@dataclass(frozen=True)
class ProbeReport:
    status: str  # bracketed | all_admissible | none_admissible
    lo: float
    hi: float
    inf_estimate: float
    attained: bool
    evaluations: tuple[tuple[float, str, float], ...] = field(default=())


def _classify(view, c, grid, dt, max_iter, drift_tol):
    sol, rep = solve_stationary(view, c, GridFunction.constant(grid, 0.0), dt, max_iter=max_iter)
    if rep.converged:
        return "admissible", rep.drift_rate
    if rep.drift_rate < -drift_tol:
        return "below", rep.drift_rate
    return "unsettled", rep.drift_rate


def admissible_interval_probe(spec_or_view, c_lo: float, c_hi: float, n_bisect: int = 10,
                              grid: TorusGrid1D | None = None, dt: float | None = None,
                              max_iter: int = 20_000) -> ProbeReport:
    """Bracket inf of the admissible set by bisecting on "iteration drifts to -infinity"."""
    if not c_lo < c_hi:
        raise PreconditionError("need c_lo < c_hi")
    view = as_view(spec_or_view)
    grid = grid or TorusGrid1D(view.hamiltonian.period, 128)
    dt = default_dt(grid, view.v_max) if dt is None else dt
    drift_tol = 0.1 * (c_hi - c_lo) / 2 ** n_bisect
    evals = []

    def below(c):
        verdict, rate = _classify(view, c, grid, dt, max_iter, drift_tol)
        evals.append((c, verdict, rate))
        return verdict == "below"

    lo_below, hi_below = below(c_lo), below(c_hi)
    if not lo_below:
        return ProbeReport("all_admissible", c_lo, c_hi, float("-inf"),
                           evals[0][1] == "admissible", tuple(evals))
    if hi_below:
        return ProbeReport("none_admissible", c_lo, c_hi, c_hi, False, tuple(evals))
    lo, hi = c_lo, c_hi
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
    attained = any(c == hi and v == "admissible" for c, v, _ in evals)
    return ProbeReport("bracketed", lo, hi, 0.5 * (lo + hi), attained, tuple(evals))


# ---------------------------------------------------------------------------
# calibrated curves


@dataclass(frozen=True)
class CalibratedCurve:
    """Backward chain x_0 = endpoint, x_1, ..., x_n (one dt apart, going back in time).

    velocities[k] is the forward-time velocity of the step x_{k+1} -> x_k."""

    grid: TorusGrid1D
    dt: float
    positions: np.ndarray
    velocities: np.ndarray
    defect: float

    @property
    def horizon(self) -> float:
        return self.dt * len(self.velocities)

    @property
    def n_steps(self) -> int:
        return len(self.velocities)


def fixed_point_defect(u: GridFunction, c: float, dt: float, view: LagrangianView) -> float:
    op = LaxOleinikOperator(view, u.grid, dt, c)
    return float(np.abs(op.apply(u.values)[0] - u.values).max())


def backward_curve(u: GridFunction, c: float, dt: float, x0: float, n_steps: int,
                   spec_or_view, tol_fixed: float = 1e-6) -> CalibratedCurve:
    """Follow the argmin chain of T[u] backward n_steps from the node nearest x0."""
    view = as_view(spec_or_view)
    op = LaxOleinikOperator(view, u.grid, dt, c)
    tu, argmin = op.apply(u.values)
    defect0 = float(np.abs(tu - u.values).max())
    if defect0 > tol_fixed * max(1.0, float(np.abs(u.values).max())):
        raise PreconditionError(f"u is not a fixed point of T (defect {defect0:.3g})")
    grid = u.grid
    idx = np.empty(n_steps + 1, dtype=int)
    vel = np.empty(n_steps)
    idx[0] = int(grid.nearest_index(x0))
    for k in range(n_steps):
        s = argmin[idx[k]]
        idx[k + 1] = op.departure[idx[k], s]
        vel[k] = op.shifts[s] * grid.h / dt
    pos = grid.nodes[idx]
    # calibration: u(x_0) - u(x_k) = sum_{j<k} dt (L(x_{j+1}, v_j, u(x_{j+1})) + c)
    uy = u.values[idx[1:]]
    action = np.cumsum(dt * (view.value(pos[1:], vel, uy) + c))
    defect = float(np.abs(u.values[idx[0]] - u.values[idx[1:]] - action).max()) if n_steps else 0.0
    return CalibratedCurve(grid, dt, pos, vel, defect)


# ---------------------------------------------------------------------------
# residual


@dataclass(frozen=True)
class ResidualReport:
    values: GridFunction
    du_upwind: np.ndarray
    kinks: np.ndarray  # bool, |D- - D+| above threshold
    concave: np.ndarray  # bool, D- > D+ at flagged nodes
    linf: float  # sup over nodes that are not concave kinks

    @property
    def kink_positions(self) -> np.ndarray:
        return self.values.grid.nodes[self.kinks]


def residual(u: GridFunction, c: float, spec) -> ResidualReport:
    """H(x_i, D u_i, u_i) - c with the one-sided difference giving the larger |violation|.

    Nodes with |D- - D+| > 10 h lip(u) are flagged as kinks; concave ones
    (D- > D+, the kind viscosity solutions of convex H may carry) are left
    out of the sup-norm."""
    grid, v = u.grid, u.values
    h = grid.h
    dm = (v - np.roll(v, 1)) / h
    dp = (np.roll(v, -1) - v) / h
    x = grid.nodes
    rm = spec.value(x, dm, v) - c
    rp = spec.value(x, dp, v) - c
    pick_m = np.abs(rm) >= np.abs(rp)
    r = np.where(pick_m, rm, rp)
    du = np.where(pick_m, dm, dp)
    lip = max(u.lip, 1e-12)
    gap = dm - dp
    kinks = np.abs(gap) > 10 * h * lip
    concave = kinks & (gap > 0)
    keep = ~concave
    linf = float(np.abs(r[keep]).max()) if np.any(keep) else 0.0
    return ResidualReport(GridFunction(grid, r), du, kinks, concave, linf)
