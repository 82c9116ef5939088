"""Closed measures on the (x, v) grid: Mather measures by LP, occupation measures,
ordinal classification and the measure-based comparison test for solutions."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import PRESET_EQUILIBRIA, LagrangianView, TorusGrid1D, VelocityGrid
from .simplex import LPError, simplex
from .weakkam import CalibratedCurve, GridFunction, PreconditionError

_ids = itertools.count()


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability masses on the product of a torus grid and a velocity grid.

    Construction checks total mass and closedness: for every hat function
    phi_k, sum masses * v * phi_k'(x) (centred stencil) must vanish to
    ``tol_closed``."""

    x_grid: TorusGrid1D
    v_grid: VelocityGrid
    masses: np.ndarray
    tol_closed: float = 1e-8
    label: str = ""
    id: int = field(default_factory=lambda: next(_ids), compare=False)

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.shape != (self.x_grid.n_nodes, self.v_grid.m_nodes):
            raise MeasureError(f"mass array shape {m.shape} does not match the grids")
        if m.min(initial=0.0) < -1e-12:
            raise MeasureError(f"negative mass {m.min():.3g}")
        m[m < 0] = 0.0
        if abs(m.sum() - 1.0) > 1e-9:
            raise MeasureError(f"total mass {m.sum():.12g} != 1")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        res = self.closedness_residual()
        if res > self.tol_closed:
            raise MeasureError(f"measure not closed: residual {res:.3g} > {self.tol_closed:.3g}")

    @classmethod
    def dirac(cls, x_grid, v_grid, x: float, v: float = 0.0, label: str = "") -> "DiscreteMeasure":
        m = np.zeros((x_grid.n_nodes, v_grid.m_nodes))
        m[x_grid.nearest_index(x), v_grid.nearest_index(v)] = 1.0
        return cls(x_grid, v_grid, m, label=label or f"delta({x:g},{v:g})")

    def flux(self) -> np.ndarray:
        return self.masses @ self.v_grid.nodes

    def closedness_residual(self) -> float:
        F = self.flux()
        return float(np.abs(np.roll(F, 1) - np.roll(F, -1)).max() / (2.0 * self.x_grid.h))

    def support(self, threshold: float = 1e-12) -> list[tuple[float, float, float]]:
        i, j = np.nonzero(self.masses > threshold)
        xs, vs = self.x_grid.nodes, self.v_grid.nodes
        return [(float(xs[a]), float(vs[b]), float(self.masses[a, b])) for a, b in zip(i, j)]

    def support_cells(self, threshold: float = 1e-12) -> list[tuple[int, int]]:
        i, j = np.nonzero(self.masses > threshold)
        return list(zip(i.tolist(), j.tolist()))

    def x_marginal(self) -> np.ndarray:
        return self.masses.sum(axis=1)

    def integrate(self, fn) -> float:
        """sum masses * fn(x, v) over cells."""
        X, Vv = np.meshgrid(self.x_grid.nodes, self.v_grid.nodes, indexing="ij")
        return float(np.sum(self.masses * fn(X, Vv)))

    def mass_near(self, x: float, v: float, cells: int = 1) -> float:
        dx = self.x_grid.distance(self.x_grid.nodes, x)
        dv = np.abs(self.v_grid.nodes - v)
        near = (dx[:, None] <= cells * self.x_grid.h + 1e-12) & (dv[None, :] <= cells * self.v_grid.spacing + 1e-12)
        return float(self.masses[near].sum())

    def combine(self, other: "DiscreteMeasure", weight: float) -> "DiscreteMeasure":
        """weight * self + (1 - weight) * other."""
        return DiscreteMeasure(self.x_grid, self.v_grid, weight * self.masses + (1 - weight) * other.masses,
                               tol_closed=max(self.tol_closed, other.tol_closed))


def check_dirac_representable(preset: str, x_grid: TorusGrid1D, v_grid: VelocityGrid) -> list[float]:
    """Preset equilibria that are not grid nodes (a warning is emitted for each)."""
    missing = [x for x in PRESET_EQUILIBRIA.get(preset, ()) if not x_grid.contains_node(x)]
    for x in missing:
        warnings.warn(f"equilibrium x={x} of {preset} is not an x-grid node", stacklevel=2)
    return missing


# ---------------------------------------------------------------------------
# LP


def _closedness_matrix(x_grid: TorusGrid1D, v_grid: VelocityGrid) -> np.ndarray:
    N, M = x_grid.n_nodes, v_grid.m_nodes
    v = v_grid.nodes
    A = np.zeros((N, N * M))
    for k in range(N):
        # phi_k'(x_i) = (delta_{i,k-1} - delta_{i,k+1}) / 2h; common 1/2h factor dropped
        im, ip = (k - 1) % N, (k + 1) % N
        A[k, im * M:(im + 1) * M] += v
        A[k, ip * M:(ip + 1) * M] -= v
    return A[:-1]  # the rows sum to zero; drop one


@dataclass(frozen=True)
class LPSolution:
    critical_value: float
    measure: DiscreteMeasure
    iterations: int


def closed_measure_lp(view: LagrangianView, theta: float, x_grid: TorusGrid1D, v_grid: VelocityGrid,
                      forbidden: set[tuple[int, int]] | frozenset = frozenset(),
                      tol_closed: float = 1e-8) -> LPSolution:
    """min sum L(x_i, v_j, theta) mu_ij over closed probability measures; c(theta) = -min."""
    N, M = x_grid.n_nodes, v_grid.m_nodes
    if N * M > 100_000:
        raise MeasureError(f"LP too large ({N * M} variables)")
    X, Vv = np.meshgrid(x_grid.nodes, v_grid.nodes, indexing="ij")
    cost = np.asarray(view.value(X, Vv, theta), dtype=float).ravel()
    A = np.vstack([_closedness_matrix(x_grid, v_grid), np.ones(N * M)])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    keep = np.ones(N * M, dtype=bool)
    for i, j in forbidden:
        keep[i * M + j] = False
    cols = np.flatnonzero(keep)
    try:
        res = simplex(cost[cols], A[:, cols], b)
    except LPError as exc:
        raise MeasureError(f"closed-measure LP failed: {exc}") from exc
    x = np.zeros(N * M)
    x[cols] = res.x
    x /= x.sum()
    mu = DiscreteMeasure(x_grid, v_grid, x.reshape(N, M), tol_closed=tol_closed, label=f"lp(theta={theta:g})")
    return LPSolution(0.0 - res.fun, mu, res.iterations)


def enumerate_mather_measures(view: LagrangianView, theta: float, x_grid: TorusGrid1D, v_grid: VelocityGrid,
                              max_measures: int = 4, value_tol: float = 1e-8) -> tuple[float, list[DiscreteMeasure]]:
    """Optimal-face vertices found by re-solving with earlier supports forbidden."""
    first = closed_measure_lp(view, theta, x_grid, v_grid)
    found = [first.measure]
    forbidden: set[tuple[int, int]] = set(first.measure.support_cells())
    while len(found) < max_measures:
        try:
            nxt = closed_measure_lp(view, theta, x_grid, v_grid, frozenset(forbidden))
        except MeasureError:
            break
        if abs(nxt.critical_value - first.critical_value) > value_tol * max(1.0, abs(first.critical_value)):
            break
        found.append(nxt.measure)
        forbidden |= set(nxt.measure.support_cells())
    return first.critical_value, found


# ---------------------------------------------------------------------------
# occupation measures


def occupation_measure(curve: CalibratedCurve, window: tuple[float, float], v_grid: VelocityGrid,
                       x_grid: TorusGrid1D | None = None, tol_closed: float | None = None) -> DiscreteMeasure:
    """Time average of (x, v) along a backward curve over backward times [a, b).

    Each sample (departure point of a step and its velocity) carries mass
    dt / (b - a), split linearly between the two nearest x nodes and sent to
    the nearest velocity node."""
    a, b = window
    dt = curve.dt
    if b - a < 10 * dt:
        raise PreconditionError("occupation window shorter than 10 dt")
    if a < 0 or b > curve.horizon + 1e-9:
        raise PreconditionError("window outside the curve horizon")
    xg = x_grid or curve.grid
    k0, k1 = int(round(a / dt)), int(round(b / dt))
    xs = curve.positions[k0 + 1:k1 + 1]
    vs = curve.velocities[k0:k1]
    w = 1.0 / len(vs)
    m = np.zeros((xg.n_nodes, v_grid.m_nodes))
    s = xg.wrap(xs) / xg.h
    i0 = np.floor(s).astype(int) % xg.n_nodes
    frac = s - np.floor(s)
    j = v_grid.nearest_index(vs)
    np.add.at(m, (i0, j), w * (1 - frac))
    np.add.at(m, ((i0 + 1) % xg.n_nodes, j), w * frac)
    tol = 5 * (xg.h + dt) if tol_closed is None else tol_closed
    return DiscreteMeasure(xg, v_grid, m, tol_closed=tol, label=f"occupation[{a:g},{b:g})")


# ---------------------------------------------------------------------------
# ordinality and comparison


def default_eps_ordinal(view: LagrangianView, h: float, dt: float = 0.0) -> float:
    return max(1e-3, 10 * (h + dt) * view.du2_sup())


@dataclass(frozen=True)
class OrdinalReport:
    integral_duL: float
    is_ordinal: bool
    eps_ordinal: float
    measure_id: int
    label: str = ""


def ordinal_classify(mu: DiscreteMeasure, view: LagrangianView, u_arg, eps_ordinal: float | None = None) -> OrdinalReport:
    """Integral of dL/du(x, v, u(x)) against mu; ordinal when it vanishes to eps_ordinal.

    ``u_arg`` is a constant theta or a GridFunction (evaluated at the measure's x nodes)."""
    eps = default_eps_ordinal(view, mu.x_grid.h) if eps_ordinal is None else eps_ordinal
    if isinstance(u_arg, GridFunction):
        ux = u_arg(mu.x_grid.nodes)[:, None]
    else:
        ux = float(u_arg)
    val = mu.integrate(lambda X, Vv: view.du(X, Vv, ux + 0.0 * X))
    return OrdinalReport(val, abs(val) <= eps, eps, mu.id, mu.label)


@dataclass(frozen=True)
class ComparisonVerdict:
    hypothesis_holds: bool
    conclusion_holds: bool
    max_violation: float  # max(u1 - u2)
    integrals: tuple[tuple[float, float], ...]
    mode: str  # order | uniqueness
    tol_order: float

    @property
    def consistent(self) -> bool:
        return (not self.hypothesis_holds) or self.conclusion_holds

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "hypothesis_holds": self.hypothesis_holds,
            "conclusion_holds": self.conclusion_holds,
            "consistent": self.consistent,
            "max_violation": self.max_violation,
            "tol_order": self.tol_order,
        }


def compare_with_measures(u1: GridFunction, u2: GridFunction, measures, dt: float = 0.0,
                          tol_order: float | None = None) -> ComparisonVerdict:
    """If int u1 dmu <= int u2 dmu for every supplied ordinal measure, check u1 <= u2.

    With no measures the two solutions must coincide."""
    if u1.grid != u2.grid:
        raise PreconditionError("u1 and u2 live on different grids")
    tol = 5 * (u1.grid.h + dt) if tol_order is None else tol_order
    diff = u1.values - u2.values
    max_violation = float(diff.max())
    if not measures:
        same = float(np.abs(diff).max()) <= tol
        return ComparisonVerdict(True, same, max_violation, (), "uniqueness", tol)
    integrals = []
    for mu in measures:
        xm = mu.x_marginal()
        nodes = mu.x_grid.nodes
        integrals.append((float(xm @ u1(nodes)), float(xm @ u2(nodes))))
    hyp = all(a <= b + tol for a, b in integrals)
    concl = max_violation <= tol
    return ComparisonVerdict(hyp, concl, max_violation, tuple(integrals), "order", tol)
