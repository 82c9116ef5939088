import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from contact_weakkam.model import LagrangianView, TorusGrid1D, VelocityGrid, pendulum_example, piecewise_example
from contact_weakkam.weakkam import GridFunction, solve_stationary

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def pendulum():
    return pendulum_example()


@pytest.fixture(scope="session")
def piecewise():
    return piecewise_example()


@pytest.fixture(scope="session")
def pendulum_view(pendulum):
    return LagrangianView(pendulum)


@pytest.fixture(scope="session")
def grid512():
    return TorusGrid1D(1.0, 512)


@pytest.fixture(scope="session")
def lp_grids():
    return TorusGrid1D(1.0, 64), VelocityGrid(2.0, 33)


@pytest.fixture(scope="session")
def pendulum_solution(pendulum, grid512):
    """Discrete fixed point at c = 0 reached from u = 0."""
    sol, rep = solve_stationary(pendulum, 0.0, GridFunction.constant(grid512, 0.0))
    assert rep.converged
    return sol, rep


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
