"""Fixed-step RK4 for the contact Hamilton and contact Euler-Lagrange equations,
plus the invariance/graph check of lifted Mather supports."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LagrangianView
from .weakkam import GridFunction, as_view

BLOWUP = 1e8


class FlowError(ValueError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float  # p on the Hamiltonian side, v on the Lagrangian side
    u: float


@dataclass(frozen=True)
class Trajectory:
    dt: float
    t: np.ndarray
    x: np.ndarray  # wrapped to [0, period)
    y: np.ndarray
    u: np.ndarray
    H: np.ndarray
    multiplier: np.ndarray
    side: str  # hamiltonian | lagrangian
    blew_up: bool = False

    def __len__(self):
        return len(self.t)

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(float(self.x[-1]), float(self.y[-1]), float(self.u[-1]))


def contact_field(spec, c: float):
    def f(s):
        x, p, u = s
        hp, hx, hu = spec.partials(x, p, u)
        return np.array([hp, -hx - hu * p, p * hp - spec.value(x, p, u) + c])
    return f


def el_field(view: LagrangianView, c: float, fd_step: float = 1e-6):
    if view.closed_form:
        def f(s):
            x, v, u = s
            return np.array([v, view.dx(x, v, u) + view.du(x, v, u) * v, view.value(x, v, u) + c])
        return f

    def f(s):
        # d/dt p(x, v, u) = L_x + L_u p  with p = dL/dv, solved for dv/dt
        x, v, u = s
        p = view.dv(x, v, u)
        Lx, Lu = view.dx(x, v, u), view.du(x, v, u)
        udot = view.value(x, v, u) + c
        e = fd_step
        p_x = (view.dv(x + e, v, u) - view.dv(x - e, v, u)) / (2 * e)
        p_v = (view.dv(x, v + e, u) - view.dv(x, v - e, u)) / (2 * e)
        p_u = (view.dv(x, v, u + e) - view.dv(x, v, u - e)) / (2 * e)
        vdot = (Lx + Lu * p - p_x * v - p_u * udot) / p_v
        return np.array([v, vdot, udot])
    return f


def rk4(field, state: np.ndarray, dt: float, n_steps: int):
    """Classical RK4; returns (states of shape (n_steps+1, 3, ...), blew_up).

    Integration stops (trajectory truncated) once |p| or |u| exceeds 1e8."""
    out = np.empty((n_steps + 1,) + state.shape)
    out[0] = state
    s = state
    for k in range(n_steps):
        k1 = field(s)
        k2 = field(s + 0.5 * dt * k1)
        k3 = field(s + 0.5 * dt * k2)
        k4 = field(s + dt * k3)
        s = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = s
        if not np.all(np.isfinite(s)) or np.abs(s[1:]).max() > BLOWUP:
            return out[:k + 2], True
    return out, False


def _check_dt(dt, T):
    if not 0 < dt <= 1e-2 + 1e-15:
        raise FlowError(f"dt must be in (0, 1e-2], got {dt}")
    if T < 0:
        raise FlowError("T must be non-negative")
    return int(round(T / dt))


def integrate_contact(spec, c: float, start: PhasePoint, T: float, dt: float = 1e-3) -> Trajectory:
    n = _check_dt(dt, T)
    states, blew = rk4(contact_field(spec, c), np.array([start.x, start.y, start.u], float), dt, n)
    x, p, u = states[:, 0], states[:, 1], states[:, 2]
    t = np.arange(len(x)) * dt
    return Trajectory(dt, t, np.mod(x, spec.period), p, u, spec.value(x, p, u),
                      -spec.partials(x, p, u)[2], "hamiltonian", blew)


def integrate_el(spec_or_view, c: float, start: PhasePoint, T: float, dt: float = 1e-3) -> Trajectory:
    view = as_view(spec_or_view)
    spec = view.hamiltonian
    n = _check_dt(dt, T)
    states, blew = rk4(el_field(view, c), np.array([start.x, start.y, start.u], float), dt, n)
    x, v, u = states[:, 0], states[:, 1], states[:, 2]
    t = np.arange(len(x)) * dt
    p = view.dv(x, v, u)
    return Trajectory(dt, t, np.mod(x, spec.period), v, u, spec.value(x, p, u),
                      -spec.partials(x, p, u)[2], "lagrangian", blew)


def integrate_contact_batch(spec, c: float, starts: np.ndarray, T: float, dt: float = 1e-3):
    """Vectorised RK4 over many starts; starts has shape (3, n). Returns states (steps, 3, n)."""
    n = _check_dt(dt, T)
    return rk4(contact_field(spec, c), np.asarray(starts, float), dt, n)


def integrate_el_batch(spec_or_view, c: float, starts: np.ndarray, T: float, dt: float = 1e-3):
    view = as_view(spec_or_view)
    n = _check_dt(dt, T)
    return rk4(el_field(view, c), np.asarray(starts, float), dt, n)


def step_defect(spec, c: float, state, dt: float) -> np.ndarray:
    """|one RK4 step of dt - two steps of dt/2| (max over components)."""
    f = contact_field(spec, c)
    s = np.asarray(state, float)
    one, _ = rk4(f, s, dt, 1)
    two, _ = rk4(f, s, dt / 2, 2)
    return np.abs(one[-1] - two[-1]).max(axis=0)


@dataclass(frozen=True)
class InvarianceReport:
    deviation: float
    graph_deviation: float
    lipschitz_estimate: float
    n_points: int
    crosses_breakpoint: bool
    blew_up: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def mather_invariance_check(u: GridFunction, c: float, mu, T: float, dt: float, spec,
                            mass_threshold: float = 1e-12) -> InvarianceReport:
    """Integrate the contact flow from the lifted support of mu and measure how far it strays.

    Each support cell (x, v) lifts to (x, dL/dv(x, v, u(x)), u(x)). The
    deviation is the largest distance, over lifted starts and sampled times,
    from the trajectory to the lifted set, with distance max(|dx|_circle, |dp|, |du|)."""
    view = as_view(spec)
    cells = mu.support(mass_threshold)
    xs = np.array([s[0] for s in cells])
    vs = np.array([s[1] for s in cells])
    us = u(xs)
    ps = view.dv(xs, vs, us)
    lifted = np.stack([xs, ps, us])
    states, blew = integrate_contact_batch(view.hamiltonian, c, lifted, T, dt)
    period = view.hamiltonian.period
    traj_x = np.mod(states[:, 0, :], period)
    dx = np.abs(traj_x[..., None] - xs[None, None, :])
    dx = np.minimum(dx, period - dx)
    dp = np.abs(states[:, 1, :, None] - ps[None, None, :])
    du = np.abs(states[:, 2, :, None] - us[None, None, :])
    dist = np.maximum(np.maximum(dx, dp), du).min(axis=-1)
    deviation = float(dist.max())

    # centered differences: the one-sided ones carry an O(h/dt) corner at rest points
    vals = u.values
    grad = GridFunction(u.grid, (np.roll(vals, -1) - np.roll(vals, 1)) / (2 * u.grid.h))
    graph_dev = float(np.abs(states[:, 1, :] - grad(traj_x)).max())
    lip = 0.0
    if len(xs) > 1:
        ddx = np.abs(xs[:, None] - xs[None, :])
        ddx = np.minimum(ddx, period - ddx)
        ddp = np.abs(ps[:, None] - ps[None, :])
        off = ddx > 0
        if np.any(off):
            lip = float((ddp[off] / ddx[off]).max())
    breakpoints = getattr(view.hamiltonian.coupling, "breakpoints", ()) if hasattr(view.hamiltonian, "coupling") else ()
    crosses = False
    for b in breakpoints:
        lo, hi = traj_x.min(), traj_x.max()
        crosses |= bool(lo <= b <= hi and hi - lo > 0)
    return InvarianceReport(deviation, graph_dev, lip, len(xs), crosses, blew)
