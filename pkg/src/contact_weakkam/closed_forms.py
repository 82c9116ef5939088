"""Closed-form and ODE-built solutions of the two built-in contact presets at c = 0."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TorusGrid1D
from .weakkam import GridFunction


class ConstructionError(RuntimeError):
    pass


def u_lambda(x, lam: float):
    """Solution family of the pendulum preset: 1 - (cos(pi x)/pi + lam)^2 on [0, 1/2),
    1 - (lam - cos(pi x)/pi)^2 on [1/2, 1)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    c = np.cos(np.pi * x) / np.pi
    return np.where(x < 0.5, 1.0 - (c + lam) ** 2, 1.0 - (lam - c) ** 2)


def u_lambda_grid(grid: TorusGrid1D, lam: float) -> GridFunction:
    if grid.period != 1.0:
        raise ValueError("u_lambda lives on the unit circle")
    return GridFunction.from_callable(grid, lambda x: u_lambda(x, lam))


def lambda_through(u0_at_zero: float) -> float:
    """The family member with u_lambda(0) equal to the given value."""
    top = 1.0 - 1.0 / np.pi ** 2
    if u0_at_zero > top + 1e-12:
        raise ValueError(f"u(0) = {u0_at_zero:.6g} exceeds u_0(0) = {top:.6g}; no family member")
    return float(max(np.sqrt(1.0 - u0_at_zero) - 1.0 / np.pi, 0.0))


# ---------------------------------------------------------------------------
# piecewise preset: g' = +-sqrt(2(1 - cos 2 pi x) - 2(1 + cos 2 pi x) g), g(1) = 0


def radicand(x, g):
    return 2.0 * (1.0 - np.cos(2 * np.pi * x)) - 2.0 * (1.0 + np.cos(2 * np.pi * x)) * g


def seed_coefficient(branch: str) -> float:
    """k in g ~ k (x - 1)^2 near x = 1; both branches solve k^2 + k = pi^2.

    Left of x = 1 the plus branch increases, so it takes the negative root;
    the minus branch takes the positive one."""
    disc = np.sqrt(1.0 + 4.0 * np.pi ** 2)
    if branch == "plus":
        return (-1.0 - disc) / 2.0
    if branch == "minus":
        return (-1.0 + disc) / 2.0
    raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")


@dataclass(frozen=True)
class GBranch:
    branch: str
    x: np.ndarray  # increasing, from 1/2 to 1
    g: np.ndarray
    k: float
    clamped_steps: int

    def __call__(self, x):
        return np.interp(x, self.x, self.g)


def example_fig2_gbranch(branch: str, dt_ode: float = 1e-4, eps: float = 1e-3,
                         clamp_tol: float = 1e-8) -> GBranch:
    """Integrate g backward from x = 1 - eps (seeded by the local quadratic) down to x = 1/2."""
    if dt_ode > 1e-4:
        raise ValueError("dt_ode must be <= 1e-4")
    sign = 1.0 if branch == "plus" else -1.0
    k = seed_coefficient(branch)
    n = int(np.ceil((0.5 - eps) / dt_ode))
    step = -(0.5 - eps) / n
    clamped = 0

    def rhs(x, g):
        nonlocal clamped
        r = radicand(x, g)
        if r < -clamp_tol:
            raise ConstructionError(f"radicand {r:.3g} < 0 at x={x:.6f} on the {branch} branch")
        if r < 0:
            clamped += 1
        return sign * np.sqrt(max(r, 0.0))

    xs = np.empty(n + 1)
    gs = np.empty(n + 1)
    xs[0], gs[0] = 1.0 - eps, k * eps ** 2
    for i in range(n):
        x, g = xs[i], gs[i]
        k1 = rhs(x, g)
        k2 = rhs(x + step / 2, g + step / 2 * k1)
        k3 = rhs(x + step / 2, g + step / 2 * k2)
        k4 = rhs(x + step, g + step * k3)
        gs[i + 1] = g + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        xs[i + 1] = x + step
    xs[-1] = 0.5
    # seed segment on [1 - eps, 1]
    xa = np.linspace(1.0 - eps, 1.0, 11)[1:]
    x_all = np.concatenate([xs[::-1], xa])
    g_all = np.concatenate([gs[::-1], k * (xa - 1.0) ** 2])
    return GBranch(branch, x_all, g_all, k, clamped)


def _sine_integral(a, b):
    """int_a^b sqrt(2(1 - cos 2 pi s)) ds for a, b in [0, 1]."""
    return 2.0 / np.pi * (np.cos(np.pi * a) - np.cos(np.pi * b))


def assemble_solution(g: GBranch, x) -> np.ndarray:
    """Extend g on [1/2, 1] to the period-2 circle: reflection about x = 1 and the
    alpha = 0 stretches, integrating upward (plus branch) or downward (minus branch)."""
    x = np.mod(np.asarray(x, dtype=float), 2.0)
    r = np.where(x < 1.0, x, 2.0 - x)  # reflection: u(x) = u(2 - x)
    g_half = g(0.5)
    if g.branch == "plus":
        flat = g_half + _sine_integral(0.5, np.minimum(r, 0.5))
    else:
        flat = g_half + _sine_integral(np.minimum(r, 0.5), 0.5)
    return np.where(r < 0.5, flat, g(np.clip(r, 0.5, 1.0)))


def fig2_solutions(grid: TorusGrid1D, dt_ode: float = 1e-4) -> tuple[GridFunction, GridFunction]:
    """(u1, u2): u1 from the plus branch, u2 from the minus branch."""
    if grid.period != 2.0:
        raise ValueError("the piecewise preset lives on R/2Z")
    u1 = GridFunction.from_callable(grid, lambda x: assemble_solution(example_fig2_gbranch("plus", dt_ode), x))
    u2 = GridFunction.from_callable(grid, lambda x: assemble_solution(example_fig2_gbranch("minus", dt_ode), x))
    return u1, u2
