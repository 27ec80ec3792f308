import numpy as np
import pytest

from heisobstacle.grid import cube_grid
from heisobstacle.heisenberg import AnalyticFunction
from heisobstacle.operators import EnergyParams
from heisobstacle.solver import ObstacleProblem

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def small_grid():
    return cube_grid(1.0, 9)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def valley_problem(n=13, p=2.0, eps=0.0, tol=1e-8, **kw):
    g = cube_grid(1.0, n)
    return ObstacleProblem.from_presets(g, AnalyticFunction("valley", (0.5, 2.0)),
                                        AnalyticFunction("constant", (0.0,)),
                                        EnergyParams(p, eps), tol=tol, **kw)
