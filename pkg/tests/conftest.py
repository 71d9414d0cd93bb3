import functools

import pytest

from motiondesign import benchmarks, solver

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def solved(name):
    """Shipped benchmark solved with its shipped predictor: (problem, D0, solution)."""
    problem = benchmarks.BUILDERS[name]()
    D0 = solver.predictor(problem)
    return problem, D0, solver.solve_motion(problem, D0)


@pytest.fixture
def solve_benchmark():
    return solved


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
