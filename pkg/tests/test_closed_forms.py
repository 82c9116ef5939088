import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from contact_weakkam.closed_forms import (ConstructionError, assemble_solution, example_fig2_gbranch,
                                          fig2_solutions, lambda_through, radicand, seed_coefficient, u_lambda,
                                          u_lambda_grid)
from contact_weakkam.model import TorusGrid1D, pendulum_example, piecewise_example
from contact_weakkam.weakkam import residual


@pytest.fixture(scope="module")
def branches():
    return example_fig2_gbranch("plus"), example_fig2_gbranch("minus")


@pytest.fixture(scope="module")
def fig2_pair():
    grid = TorusGrid1D(2.0, 1024)
    return grid, fig2_solutions(grid)


# --- pendulum family ---------------------------------------------------------------


@given(lam=st.floats(0, 2), x=st.floats(0, 1))
def test_family_solves_the_equation_pointwise(lam, x):
    e = 1e-6
    if min(abs(x - 0.5), x, 1 - x) < 1e-3:
        return
    du = (u_lambda(x + e, lam) - u_lambda(x - e, lam)) / (2 * e)
    H = pendulum_example()
    assert H.value(x, du, u_lambda(x, lam)) == pytest.approx(0.0, abs=1e-6)


def test_family_ordering_and_kinks():
    grid = TorusGrid1D(1.0, 512)
    lams = [0.0, 0.25, 0.5, 1 - 1 / np.pi, 1.0]
    us = [u_lambda_grid(grid, lam) for lam in lams]
    for a, b in zip(us, us[1:]):
        assert np.all(b.values <= a.values + 1e-15)
    for lam in lams:
        assert u_lambda(0.5 - 1e-12, lam) == pytest.approx(u_lambda(0.5, lam), abs=1e-9)
        assert u_lambda(0.5, lam) == pytest.approx(1 - lam ** 2)
    for lam, u in zip(lams, us):
        res = residual(u, 0.0, pendulum_example())
        assert res.linf <= 0.05
        if lam > 0:
            assert res.kinks[256] and res.concave[256]


@given(lam=st.floats(0, 3))
def test_lambda_through_inverts_the_family(lam):
    assert lambda_through(float(u_lambda(0.0, lam))) == pytest.approx(lam, abs=1e-9)


def test_lambda_through_rejects_values_above_the_family():
    with pytest.raises(ValueError):
        lambda_through(1.0)


# --- piecewise preset: the g branches -----------------------------------------------


@pytest.mark.parametrize("branch,bracket", [("plus", (-10.0, -0.5)), ("minus", (0.5, 9.0))])
def test_seed_root_by_shooting_the_quadratic(branch, bracket):
    # g = k (x - 1)^2 makes both sides of the ODE linear in (1 - x); match them left of 1
    sign = 1.0 if branch == "plus" else -1.0
    k = brentq(lambda k: -2 * k - sign * 2 * np.sqrt(np.pi ** 2 - k), *bracket)
    assert seed_coefficient(branch) == pytest.approx(k, abs=1e-12)
    assert k ** 2 + k == pytest.approx(np.pi ** 2)


def test_seed_values():
    assert seed_coefficient("plus") == pytest.approx(-3.681, abs=1e-3)
    assert seed_coefficient("minus") == pytest.approx(2.681, abs=1e-3)
    with pytest.raises(ValueError):
        seed_coefficient("sideways")


@pytest.mark.parametrize("idx,branch", [(0, "plus"), (1, "minus")])
def test_branches_against_adaptive_integrator(branches, idx, branch):
    g = branches[idx]
    assert g(1.0) == 0.0
    sign = 1.0 if branch == "plus" else -1.0
    k = seed_coefficient(branch)
    eps = 1e-3
    sol = solve_ivp(lambda x, y: sign * np.sqrt(np.maximum(radicand(x, y), 0.0)), (1 - eps, 0.5),
                    [k * eps ** 2], method="DOP853", rtol=1e-11, atol=1e-13, dense_output=True)
    xs = np.linspace(0.5, 1 - eps, 200)
    assert np.abs(g(xs) - sol.sol(xs)[0]).max() <= 1e-6
    assert np.all(radicand(g.x, g.g) >= -1e-8)


def test_branch_endpoint_values(branches):
    plus, minus = branches
    assert plus(0.5) == pytest.approx(-0.679, abs=2e-3)
    assert minus(0.5) == pytest.approx(0.600, abs=2e-3)


def test_construction_guards():
    with pytest.raises(ValueError):
        example_fig2_gbranch("plus", dt_ode=1e-3)
    with pytest.raises(ConstructionError):
        example_fig2_gbranch("plus", clamp_tol=-1.0)  # any clamping is fatal


# --- piecewise preset: assembled solutions ------------------------------------------


def test_flat_stretch_matches_quadrature(branches):
    plus, minus = branches
    for x in (0.0, 0.1, 0.37):
        integral = quad(lambda s: np.sqrt(2 * (1 - np.cos(2 * np.pi * s))), x, 0.5)[0]
        assert assemble_solution(plus, x) == pytest.approx(plus(0.5) - integral, abs=1e-10)
        assert assemble_solution(minus, x) == pytest.approx(minus(0.5) + integral, abs=1e-10)


def test_assembled_solutions_are_continuous_and_reflected(branches):
    for g in branches:
        for a in (0.5, 1.5):
            lo, hi = assemble_solution(g, a - 1e-9), assemble_solution(g, a + 1e-9)
            assert lo == pytest.approx(hi, abs=1e-6)
        x = np.linspace(0, 2, 77)
        np.testing.assert_allclose(assemble_solution(g, x), assemble_solution(g, 2 - x), atol=1e-12)


def test_fig2_pair_solves_and_is_ordered(fig2_pair):
    grid, (u1, u2) = fig2_pair
    P = piecewise_example()
    assert residual(u1, 0.0, P).linf <= 0.05
    assert residual(u2, 0.0, P).linf <= 0.05
    assert np.all(u1.values <= u2.values + 1e-12)
    one = grid.n_nodes // 2
    assert u1.values[one] == u2.values[one] == 0.0
    assert u1.sup_distance(u2) > 1.0


def test_fig2_requires_period_two():
    with pytest.raises(ValueError):
        fig2_solutions(TorusGrid1D(1.0, 64))
