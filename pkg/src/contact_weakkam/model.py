"""Grids, contact Hamiltonians on the circle, and the Legendre bridge to Lagrangians.

Everything here is immutable and vectorised over numpy arrays: positions,
momenta/velocities and u-values broadcast against each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

TWO_PI = 2.0 * np.pi
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class ModelError(ValueError):
    pass


class OutOfRangeError(ModelError):
    pass


class CoverageError(ModelError):
    """Fenchel maximiser sits on the edge of the sampled momentum/velocity window."""


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class TorusGrid1D:
    period: float
    n_nodes: int

    def __post_init__(self):
        if not self.period > 0:
            raise ModelError(f"period must be positive, got {self.period}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 16:
            raise ModelError(f"n_nodes must be an integer >= 16, got {self.n_nodes}")

    @property
    def h(self) -> float:
        return self.period / self.n_nodes

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.h

    def wrap(self, x):
        w = np.mod(x, self.period)
        # np.mod can return `period` itself for tiny negative inputs
        return np.where(w >= self.period, 0.0, w)

    def displacement(self, a, b):
        """Minimal-image signed displacement b - a on the circle."""
        d = np.mod(np.asarray(b) - np.asarray(a) + 0.5 * self.period, self.period)
        return d - 0.5 * self.period

    def distance(self, a, b):
        return np.abs(self.displacement(a, b))

    def nearest_index(self, x) -> np.ndarray:
        return np.rint(self.wrap(x) / self.h).astype(int) % self.n_nodes

    def contains_node(self, x, tol: float = 1e-12) -> bool:
        q = self.wrap(x) / self.h
        return bool(abs(q - np.rint(q)) <= tol / self.h)

    def interpolate(self, values: np.ndarray, x) -> np.ndarray:
        """Periodic piecewise-linear interpolation of nodal values."""
        s = self.wrap(x) / self.h
        i0 = np.floor(s).astype(int) % self.n_nodes
        w = s - np.floor(s)
        return (1.0 - w) * values[i0] + w * values[(i0 + 1) % self.n_nodes]


@dataclass(frozen=True)
class VelocityGrid:
    v_max: float
    m_nodes: int

    def __post_init__(self):
        if not self.v_max > 0:
            raise ModelError(f"v_max must be positive, got {self.v_max}")
        if int(self.m_nodes) != self.m_nodes or self.m_nodes < 3 or self.m_nodes % 2 == 0:
            raise ModelError(f"m_nodes must be an odd integer >= 3, got {self.m_nodes}")

    @property
    def nodes(self) -> np.ndarray:
        half = self.m_nodes // 2
        return np.arange(-half, half + 1) * (self.v_max / half)

    @property
    def spacing(self) -> float:
        return self.v_max / (self.m_nodes // 2)

    @property
    def zero_index(self) -> int:
        return self.m_nodes // 2

    def nearest_index(self, v) -> np.ndarray:
        j = np.rint(np.asarray(v) / self.spacing).astype(int) + self.zero_index
        return np.clip(j, 0, self.m_nodes - 1)

    def check_covers(self, lipschitz: float) -> None:
        if lipschitz > self.v_max:
            raise ModelError(
                f"solution Lipschitz constant {lipschitz:.4g} exceeds v_max={self.v_max}"
            )


# ---------------------------------------------------------------------------
# trigonometric building blocks


@dataclass(frozen=True)
class TrigPoly:
    """const + sum a*cos(2*pi*nu*x) + sum b*sin(2*pi*nu*x); terms keyed by frequency nu."""

    const: float = 0.0
    cos: tuple[tuple[float, float], ...] = ()
    sin: tuple[tuple[float, float], ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.const)
        for nu, a in self.cos:
            out = out + a * np.cos(TWO_PI * nu * x)
        for nu, b in self.sin:
            out = out + b * np.sin(TWO_PI * nu * x)
        return out

    def derivative(self) -> "TrigPoly":
        cos_terms = tuple((nu, TWO_PI * nu * b) for nu, b in self.sin)
        sin_terms = tuple((nu, -TWO_PI * nu * a) for nu, a in self.cos)
        return TrigPoly(0.0, cos_terms, sin_terms)

    def sup_abs_bound(self) -> float:
        return abs(self.const) + sum(abs(a) for _, a in self.cos) + sum(abs(b) for _, b in self.sin)


@dataclass(frozen=True)
class PiecewiseTrig:
    """Trig polynomials on consecutive intervals [lo, hi) tiling [0, period).

    Breakpoint continuity is enforced at construction (including the wrap at
    period -> 0)."""

    period: float
    pieces: tuple[tuple[float, float, TrigPoly], ...]
    tol: float = 1e-12

    def __post_init__(self):
        if not self.pieces:
            raise ModelError("PiecewiseTrig needs at least one piece")
        lo0 = self.pieces[0][0]
        if abs(lo0) > self.tol or abs(self.pieces[-1][1] - self.period) > self.tol:
            raise ModelError("pieces must tile [0, period)")
        for (a, b, f), (c, d, g) in zip(self.pieces, self.pieces[1:]):
            if abs(b - c) > self.tol:
                raise ModelError(f"gap between pieces at {b} / {c}")
        ends = [(b, f, g) for (_, b, f), (_, _, g) in zip(self.pieces, self.pieces[1:])]
        ends.append((self.period, self.pieces[-1][2], self.pieces[0][2]))
        for b, f, g in ends:
            jump = float(f(b) - g(b % self.period))
            if abs(jump) > self.tol:
                raise ModelError(f"discontinuity {jump:.3g} at breakpoint x={b}")

    def _select(self, x, attr):
        x = np.mod(np.asarray(x, dtype=float), self.period)
        out = np.zeros_like(x)
        for lo, hi, f in self.pieces:
            mask = (x >= lo) & (x < hi)
            if np.any(mask):
                g = f if attr is None else f.derivative()
                out = np.where(mask, g(x), out)
        return out

    def __call__(self, x):
        return self._select(x, None)

    def derivative_values(self, x):
        return self._select(x, "d")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(lo for lo, _, _ in self.pieces)


def _as_func(f):
    """Return (value, derivative) callables for a TrigPoly or PiecewiseTrig."""
    if isinstance(f, PiecewiseTrig):
        return f, f.derivative_values
    return f, f.derivative()


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class MechanicalContactHamiltonian:
    """H(x, p, u) = p^2/2 + V(x) + alpha(x) * f(u), with f(u) = u - u0."""

    potential: TrigPoly | PiecewiseTrig
    coupling: TrigPoly | PiecewiseTrig
    period: float = 1.0
    u_form: str = "linear"
    u0: float = 0.0
    name: str = "custom"
    kind: str = field(default="mechanical_contact", init=False)

    def __post_init__(self):
        if self.u_form not in ("linear", "affine"):
            raise ModelError(f"unsupported u_form {self.u_form!r}")
        if self.u_form == "linear" and self.u0 != 0.0:
            raise ModelError("u0 only applies to the affine u_form")
        for f in (self.potential, self.coupling):
            if isinstance(f, PiecewiseTrig) and abs(f.period - self.period) > 1e-12:
                raise ModelError("piecewise function period does not match Hamiltonian period")

    def _f(self, u):
        return np.asarray(u, dtype=float) - self.u0

    def V(self, x):
        return _as_func(self.potential)[0](x)

    def dV(self, x):
        return _as_func(self.potential)[1](x)

    def alpha(self, x):
        return _as_func(self.coupling)[0](x)

    def dalpha(self, x):
        return _as_func(self.coupling)[1](x)

    def value(self, x, p, u):
        p = np.asarray(p, dtype=float)
        return 0.5 * p * p + self.V(x) + self.alpha(x) * self._f(u)

    def partials(self, x, p, u):
        """(dH/dp, dH/dx, dH/du)."""
        p = np.asarray(p, dtype=float)
        a = self.alpha(x)
        dp = p + 0.0 * a
        dx = self.dV(x) + self.dalpha(x) * self._f(u)
        du = a * np.ones_like(self._f(u))
        return dp, dx, du

    def du2_sup(self) -> float:
        return 0.0

    @property
    def is_u_independent(self) -> bool:
        c = self.coupling
        return isinstance(c, TrigPoly) and c.sup_abs_bound() == 0.0

    @property
    def is_smooth(self) -> bool:
        return not any(isinstance(f, PiecewiseTrig) for f in (self.potential, self.coupling))


@dataclass(frozen=True)
class TabulatedHamiltonian:
    """H sampled on a (x, p, u) product grid, x periodic; cubic interpolation in between.

    Partials are centred finite differences of the interpolant with step
    1e-6 times the local axis scale."""

    period: float
    x_nodes: np.ndarray
    p_nodes: np.ndarray
    u_nodes: np.ndarray
    values: np.ndarray
    name: str = "tabulated"
    kind: str = field(default="tabulated", init=False)

    def __post_init__(self):
        shape = (len(self.x_nodes), len(self.p_nodes), len(self.u_nodes))
        if np.shape(self.values) != shape:
            raise ModelError(f"values shape {np.shape(self.values)} != {shape}")
        # pad three nodes on each side in x so cubic interpolation is periodic
        xs = np.asarray(self.x_nodes, dtype=float)
        pad = 3
        xp = np.concatenate([xs[-pad:] - self.period, xs, xs[:pad] + self.period])
        vp = np.concatenate([self.values[-pad:], self.values, self.values[:pad]], axis=0)
        interp = RegularGridInterpolator(
            (xp, np.asarray(self.p_nodes, float), np.asarray(self.u_nodes, float)),
            np.asarray(vp, float),
            method="cubic",
            bounds_error=False,
            fill_value=None,
        )
        object.__setattr__(self, "_interp", interp)

    @classmethod
    def from_function(cls, fn: Callable, period: float, x_nodes: int, p_range: tuple[float, float],
                      p_nodes: int, u_range: tuple[float, float], u_nodes: int, name="tabulated"):
        xs = np.arange(x_nodes) * period / x_nodes
        ps = np.linspace(*p_range, p_nodes)
        us = np.linspace(*u_range, u_nodes)
        X, P, U = np.meshgrid(xs, ps, us, indexing="ij")
        return cls(period, xs, ps, us, np.asarray(fn(X, P, U), float), name=name)

    def _check(self, p, u):
        u = np.asarray(u, float)
        lo, hi = self.u_nodes[0], self.u_nodes[-1]
        if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
            raise OutOfRangeError(f"u outside tabulated range [{lo}, {hi}]")
        p = np.asarray(p, float)
        if np.any(p < self.p_nodes[0] - 1e-12) or np.any(p > self.p_nodes[-1] + 1e-12):
            raise OutOfRangeError(f"p outside tabulated range [{self.p_nodes[0]}, {self.p_nodes[-1]}]")

    def value(self, x, p, u):
        self._check(p, u)
        x, p, u = np.broadcast_arrays(np.mod(np.asarray(x, float), self.period),
                                      np.asarray(p, float), np.asarray(u, float))
        pts = np.stack([x.ravel(), p.ravel(), u.ravel()], axis=-1)
        return self._interp(pts).reshape(x.shape)

    def partials(self, x, p, u):
        x, p, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float), np.asarray(u, float))
        sx = 1e-6 * self.period
        sp = 1e-6 * max(1.0, float(np.ptp(self.p_nodes)))
        su = 1e-6 * max(1.0, float(np.ptp(self.u_nodes)))
        u_lo, u_hi = self.u_nodes[0], self.u_nodes[-1]
        up = np.minimum(u + su, u_hi)
        um = np.maximum(u - su, u_lo)
        dp = (self.value(x, p + sp, u) - self.value(x, p - sp, u)) / (2 * sp)
        dx = (self.value(x + sx, p, u) - self.value(x - sx, p, u)) / (2 * sx)
        du = (self.value(x, p, up) - self.value(x, p, um)) / (up - um)
        return dp, dx, du

    def du2_sup(self) -> float:
        d2 = np.diff(self.values, n=2, axis=2) / np.diff(self.u_nodes)[0] ** 2
        return float(np.abs(d2).max()) if d2.size else 0.0

    @property
    def is_u_independent(self) -> bool:
        return bool(np.allclose(np.diff(self.values, axis=2), 0.0))

    @property
    def is_smooth(self) -> bool:
        return True


ContactHamiltonianSpec = MechanicalContactHamiltonian | TabulatedHamiltonian


def eval_hamiltonian(spec, x, p, u):
    return spec.value(x, p, u)


def eval_hamiltonian_partials(spec, x, p, u):
    return spec.partials(x, p, u)


# ---------------------------------------------------------------------------
# presets

_ZERO = TrigPoly()
_PENDULUM_V = TrigPoly(-1.0, cos=((1.0, 1.0),))  # cos 2 pi x - 1


def pendulum_example() -> MechanicalContactHamiltonian:
    """p^2/2 + cos 2 pi x - 1 + (1 - cos 2 pi x) u on the unit circle."""
    return MechanicalContactHamiltonian(
        _PENDULUM_V, TrigPoly(1.0, cos=((1.0, -1.0),)), period=1.0, name="pendulum_example"
    )


def piecewise_coupling() -> PiecewiseTrig:
    bump = TrigPoly(1.0, cos=((1.0, 1.0),))
    return PiecewiseTrig(2.0, ((0.0, 0.5, _ZERO), (0.5, 1.5, bump), (1.5, 2.0, _ZERO)))


def piecewise_example() -> MechanicalContactHamiltonian:
    """p^2/2 + cos 2 pi x - 1 + alpha(x) u on R/2Z, alpha = 1 + cos 2 pi x on [1/2, 3/2), else 0."""
    return MechanicalContactHamiltonian(
        _PENDULUM_V, piecewise_coupling(), period=2.0, name="piecewise_example"
    )


def pendulum_classical() -> MechanicalContactHamiltonian:
    return MechanicalContactHamiltonian(_PENDULUM_V, _ZERO, period=1.0, name="pendulum_classical")


def free_particle(period: float = 1.0) -> MechanicalContactHamiltonian:
    return MechanicalContactHamiltonian(_ZERO, _ZERO, period=period, name="free_particle")


def free_strict(period: float = 1.0) -> MechanicalContactHamiltonian:
    """p^2/2 + u, strictly increasing in u."""
    return MechanicalContactHamiltonian(_ZERO, TrigPoly(1.0), period=period, name="free_strict")


PRESETS: dict[str, Callable[[], MechanicalContactHamiltonian]] = {
    "pendulum_example": pendulum_example,
    "piecewise_example": piecewise_example,
    "pendulum_classical": pendulum_classical,
    "free_particle": free_particle,
    "free_strict": free_strict,
}

PRESET_EQUILIBRIA = {
    "pendulum_example": (0.0, 0.5),
    "piecewise_example": (0.0, 0.5, 1.0),
    "pendulum_classical": (0.0, 0.5),
}


# ---------------------------------------------------------------------------
# H3


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    min_slope: float
    argmin_x: float
    tol: float


def verify_h3(spec, x_samples: int = 64, u_samples: int = 32, p_samples: int = 9,
              u_range: tuple[float, float] = (-5.0, 5.0), p_range: tuple[float, float] = (-2.0, 2.0),
              tol_mono: float = 1e-9) -> MonotonicityReport:
    """Smallest sampled difference quotient of H in u; H3 holds iff it is >= -tol_mono."""
    if x_samples < 16 or u_samples < 16:
        raise ModelError("verify_h3 needs at least 16 x and u samples")
    if isinstance(spec, TabulatedHamiltonian):
        u_range = (max(u_range[0], spec.u_nodes[0]), min(u_range[1], spec.u_nodes[-1]))
        p_range = (max(p_range[0], spec.p_nodes[0]), min(p_range[1], spec.p_nodes[-1]))
    xs = np.arange(x_samples) * spec.period / x_samples
    us = np.linspace(*u_range, u_samples)
    ps = np.linspace(*p_range, p_samples)
    X, P, U = np.meshgrid(xs, ps, us, indexing="ij")
    Hv = spec.value(X, P, U)
    slopes = np.diff(Hv, axis=2) / np.diff(us)
    k = np.unravel_index(np.argmin(slopes), slopes.shape)
    m = float(slopes[k])
    return MonotonicityReport(m >= -tol_mono, m, float(xs[k[0]]), tol_mono)


# ---------------------------------------------------------------------------
# Lagrangian side


def _golden_refine(fn, lo, hi, steps):
    """Vectorised golden-section maximisation of fn on [lo, hi]; returns the bracket."""
    a, b = lo.copy(), hi.copy()
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(steps):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - GOLDEN * (b - a)
        new_d = a + GOLDEN * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_eval = fn(np.where(left, new_c, new_d))
        fc, fd = np.where(left, f_eval, fd), np.where(left, fc, f_eval)
        c, d = c_next, d_next
    return a, b, c, d, fc, fd


def fenchel_max(objective, centre_lo: float, centre_hi: float, n_grid: int, golden_steps: int = 3,
                shape=None):
    """max_s objective(s) over a sample window, refined by golden section then a parabolic step.

    ``objective`` maps an array of trial points (broadcast with ``shape``) to
    values. Returns (maximum, argmax). Raises CoverageError if the grid
    maximiser is on the window boundary."""
    shape = () if shape is None else tuple(shape)
    grid = np.linspace(centre_lo, centre_hi, n_grid)
    step = grid[1] - grid[0]
    vals = objective(grid.reshape((-1,) + (1,) * len(shape)))
    k = np.argmax(vals, axis=0)
    if np.any(k == 0) or np.any(k == n_grid - 1):
        raise CoverageError("Fenchel maximiser on the boundary of the sample window; enlarge it")
    s0 = grid[k]
    a, b, c, d, fc, fd = _golden_refine(objective, s0 - step, s0 + step, golden_steps)
    # parabola through (a, m, b) with m the better interior golden point
    m = np.where(fc >= fd, c, d)
    fa, fb = objective(a), objective(b)
    fm = np.maximum(fc, fd)
    num = (m - a) ** 2 * (fm - fb) - (m - b) ** 2 * (fm - fa)
    den = (m - a) * (fm - fb) - (m - b) * (fm - fa)
    safe = np.abs(den) > 1e-300
    s = np.where(safe, m - 0.5 * num / np.where(safe, den, 1.0), m)
    s = np.clip(s, a, b)
    fs = objective(s)
    better = fs >= fm
    return np.where(better, fs, fm), np.where(better, s, m)


@dataclass(frozen=True)
class LagrangianView:
    """L(x, v, u) = max_p (p v - H(x, p, u)), closed form for mechanical Hamiltonians."""

    hamiltonian: MechanicalContactHamiltonian | TabulatedHamiltonian
    strategy: str = "closed_form"
    v_max: float = 4.0
    m_nodes: int = 65

    def __post_init__(self):
        if self.strategy not in ("closed_form", "numeric"):
            raise ModelError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "closed_form" and self.hamiltonian.kind != "mechanical_contact":
            raise ModelError("closed-form Lagrangian only exists for mechanical_contact")

    @property
    def closed_form(self) -> bool:
        return self.strategy == "closed_form"

    def _momentum(self, x, v, u):
        """Legendre-dual momentum dL/dv and the value L."""
        H = self.hamiltonian
        x, v, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float), np.asarray(u, float))
        lo, hi = -2.0 * self.v_max, 2.0 * self.v_max
        if isinstance(H, TabulatedHamiltonian):
            lo, hi = max(lo, H.p_nodes[0]), min(hi, H.p_nodes[-1])
        val, p = fenchel_max(lambda p: p * v - H.value(x, p, u), lo, hi, 4 * self.m_nodes, shape=x.shape)
        return val, p

    def value(self, x, v, u):
        H = self.hamiltonian
        if self.closed_form:
            v = np.asarray(v, float)
            return 0.5 * v * v - H.V(x) - H.alpha(x) * H._f(u)
        return self._momentum(x, v, u)[0]

    def dv(self, x, v, u):
        if self.closed_form:
            return np.asarray(v, float) + 0.0 * np.asarray(x, float) + 0.0 * np.asarray(u, float)
        return self._momentum(x, v, u)[1]

    def du(self, x, v, u):
        """dL/du = -dH/du at the Legendre-dual momentum."""
        H = self.hamiltonian
        if self.closed_form:
            return -H.alpha(x) * np.ones_like(H._f(u)) + 0.0 * np.asarray(v, float)
        p = self.dv(x, v, u)
        return -H.partials(x, p, u)[2]

    def dx(self, x, v, u):
        H = self.hamiltonian
        if self.closed_form:
            return -H.dV(x) - H.dalpha(x) * H._f(u) + 0.0 * np.asarray(v, float)
        p = self.dv(x, v, u)
        return -H.partials(x, p, u)[1]

    def du2_sup(self) -> float:
        return self.hamiltonian.du2_sup()

    def du_sup(self, u_range: tuple[float, float] = (-10.0, 10.0), n: int = 256) -> float:
        """sup |dL/du| over the circle (mechanical) or over sampled points (tabulated)."""
        H = self.hamiltonian
        xs = np.arange(n) * H.period / n
        if self.closed_form:
            return float(np.abs(H.alpha(xs)).max())
        lo = max(u_range[0], H.u_nodes[0])
        hi = min(u_range[1], H.u_nodes[-1])
        us = np.linspace(lo, hi, 9)
        X, U = np.meshgrid(xs, us, indexing="ij")
        return float(np.abs(H.partials(X, 0.0 * X, U)[2]).max())


def eval_lagrangian(view: LagrangianView, x, v, u):
    return view.value(x, v, u)


def eval_lagrangian_partials(view: LagrangianView, x, v, u):
    """(dL/dv, dL/dx, dL/du)."""
    return view.dv(x, v, u), view.dx(x, v, u), view.du(x, v, u)


def fenchel_hamiltonian(view: LagrangianView, x, p, u, v_window: float | None = None,
                        n_grid: int | None = None):
    """Numeric H = max_v (p v - L(x, v, u)); the inverse direction of the Legendre bridge."""
    x, p, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float), np.asarray(u, float))
    w = view.v_max if v_window is None else v_window
    n = 4 * view.m_nodes if n_grid is None else n_grid
    val, _ = fenchel_max(lambda v: p * v - view.value(x, v, u), -w, w, n, shape=x.shape)
    return val


def make_spec_from_terms(potential: TrigPoly, coupling: TrigPoly, period: float, u_form: str = "linear",
                         u0: float = 0.0, name: str = "custom") -> MechanicalContactHamiltonian:
    return MechanicalContactHamiltonian(potential, coupling, period=period, u_form=u_form, u0=u0, name=name)


def trig_from_terms(const: float, cos_terms: Sequence[tuple[float, float]] = (),
                    sin_terms: Sequence[tuple[float, float]] = ()) -> TrigPoly:
    return TrigPoly(float(const), tuple((float(a), float(b)) for a, b in cos_terms),
                    tuple((float(a), float(b)) for a, b in sin_terms))
