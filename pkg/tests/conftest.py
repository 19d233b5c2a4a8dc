import numpy as np
import pytest

from bfburgers.initial_data import riemann
from bfburgers.model import builtin_model
from bfburgers.viscous_solver import Grid, SolverConfig, solve

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def burgers():
    return builtin_model("burgers_arctan", 1.0)


@pytest.fixture(scope="session")
def burgers_sharp():
    return builtin_model("burgers_arctan", 1.0 / 16.0)


@pytest.fixture(scope="session")
def riemann_run(burgers_sharp):
    """Burgers Riemann problem (1, 0) with Q(-inf) = -1/16 and eps = dx = 0.01."""
    g = Grid.from_spacing(-1.0, 2.0, 0.01)
    u0 = riemann(1.0, 0.0).sample(g)
    times = tuple(np.round(np.linspace(0.025, 1.0, 40), 12))
    return solve(u0, burgers_sharp, SolverConfig(epsilon=g.dx, t_end=1.0, snapshot_times=times))
