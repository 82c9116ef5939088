import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contact_weakkam.closed_forms import fig2_solutions
from contact_weakkam.flows import (FlowError, PhasePoint, integrate_contact, integrate_el, mather_invariance_check,
                                   step_defect)
from contact_weakkam.measures import DiscreteMeasure
from contact_weakkam.model import (LagrangianView, TorusGrid1D, VelocityGrid, free_particle, free_strict,
                                   pendulum_classical, pendulum_example, piecewise_example)
from contact_weakkam.pipelines import batch_conjugacy


def test_equilibrium_stays_put():
    tr = integrate_contact(pendulum_example(), 0.0, PhasePoint(0.0, 0.0, 0.3), 100.0, 1e-2)
    assert tr.end == PhasePoint(0.0, 0.0, 0.3)


def test_free_particle_transport():
    tr = integrate_contact(free_particle(), 0.0, PhasePoint(0.0, 1.0, 0.0), 1.0, 1e-3)
    assert min(tr.end.x, 1.0 - tr.end.x) == pytest.approx(0.0, abs=1e-12)
    assert tr.end.y == pytest.approx(1.0) and tr.end.u == pytest.approx(0.5)


def test_strict_particle_has_exponential_momentum():
    # p' = -H_u p = -p, u' = p^2 - (p^2/2 + u) + c
    tr = integrate_contact(free_strict(), 0.0, PhasePoint(0.2, 1.0, 0.0), 2.0, 1e-3)
    np.testing.assert_allclose(tr.y, np.exp(-tr.t), rtol=1e-10)
    np.testing.assert_allclose(tr.multiplier, -1.0)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(0, 1), p=st.floats(-1, 1), u=st.floats(-1, 1))
def test_energy_relation_along_contact_flow(x, p, u):
    # d/dt (H - c) = -H_u (H - c): H - c = (H0 - c) exp(int multiplier)
    H = pendulum_example()
    c = 0.1
    tr = integrate_contact(H, c, PhasePoint(x, p, u), 1.0, 1e-3)
    integ = np.concatenate([[0.0], np.cumsum(0.5 * (tr.multiplier[1:] + tr.multiplier[:-1]) * tr.dt)])
    predicted = (tr.H[0] - c) * np.exp(integ)
    assert np.abs(tr.H - c - predicted).max() <= 1e-5 * max(1.0, abs(tr.H[0] - c))


def test_classical_energy_conserved():
    tr = integrate_contact(pendulum_classical(), 0.0, PhasePoint(0.1, 0.5, 0.0), 10.0, 1e-3)
    assert np.ptp(tr.H) <= 1e-9


def test_rk4_order():
    H = pendulum_example()
    s = np.array([0.13, 0.4, 0.2])
    ratio = step_defect(H, 0.0, s, 1e-2) / step_defect(H, 0.0, s, 5e-3)
    assert ratio >= 8.0


def test_legendre_conjugacy_random_starts():
    view = LagrangianView(pendulum_example())
    assert batch_conjugacy(view, 0.0, 10.0, 1e-2, seed=3) <= 1e-6
    view = LagrangianView(piecewise_example())
    assert batch_conjugacy(view, 0.0, 10.0, 1e-2, seed=4) <= 1e-6


def test_numeric_lagrangian_side_matches_closed_form():
    H = pendulum_example()
    a = integrate_el(LagrangianView(H, "closed_form"), 0.0, PhasePoint(0.1, 0.3, 0.2), 1.0, 1e-2)
    b = integrate_el(LagrangianView(H, "numeric"), 0.0, PhasePoint(0.1, 0.3, 0.2), 1.0, 1e-2)
    assert np.abs(a.y - b.y).max() <= 1e-4


def test_step_size_and_blowup_guards():
    with pytest.raises(FlowError):
        integrate_contact(pendulum_example(), 0.0, PhasePoint(0, 0, 0), 1.0, 0.05)
    # with H_u = 1 a huge |u| decays back instead of escaping
    tr = integrate_contact(free_strict(), 0.0, PhasePoint(0.0, 0.0, -1e8 + 1.0), 50.0, 1e-2)
    assert not tr.blew_up
    tr = integrate_contact(pendulum_example(), 0.0, PhasePoint(0.3, 0.0, -1e7), 100.0, 1e-2)
    assert tr.blew_up and len(tr) < 10_001


def test_mather_invariance_pendulum(pendulum_solution):
    sol, _ = pendulum_solution
    mu = DiscreteMeasure.dirac(sol.grid, VelocityGrid(4.0, 65), 0.0)
    rep = mather_invariance_check(sol, 0.0, mu, 100.0, 1e-2, pendulum_example())
    assert rep.deviation <= 1e-6 and rep.graph_deviation <= 1e-6 and not rep.blew_up


def test_mather_invariance_piecewise():
    grid = TorusGrid1D(2.0, 1024)
    u1, _ = fig2_solutions(grid)
    mu = DiscreteMeasure.dirac(grid, VelocityGrid(4.0, 65), 1.0)
    rep = mather_invariance_check(u1, 0.0, mu, 100.0, 1e-2, piecewise_example())
    assert rep.deviation <= 1e-4


def test_non_invariant_lift_is_detected(pendulum_solution):
    # the top of the pendulum potential is a rest point of H0 but not of the contact flow at c = 0
    sol, _ = pendulum_solution
    mu = DiscreteMeasure.dirac(sol.grid, VelocityGrid(4.0, 65), 0.5)
    rep = mather_invariance_check(sol, 0.0, mu, 10.0, 1e-2, pendulum_example())
    assert rep.deviation > 1e-2
