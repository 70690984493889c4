import time

import numpy as np
import pytest

from fdegrowth import (
    DelayMeasure,
    RateTransform,
    StepControl,
    make_paper_example,
    solve_fde,
)

HORIZON = 1000.0
STEP = StepControl(h=0.0625)


def two_atoms():
    return DelayMeasure(1.0, ((0.0, 1.0), (-1.0, 1.0)))


def lag_two():
    return DelayMeasure(2.0, ((-2.0, 1.0),))


class Run:
    """A long trajectory plus what the diagnostics need, computed once."""

    def __init__(self, alpha, measure):
        self.f = make_paper_example(alpha)
        self.m = measure
        t0 = time.perf_counter()
        self.traj = solve_fde(self.f, measure, None, HORIZON, STEP)
        self.solve_seconds = time.perf_counter() - t0
        self.rt = RateTransform(self.f)


@pytest.fixture(scope="session")
def run_a1():
    return Run(1.0, two_atoms())


@pytest.fixture(scope="session")
def run_a1_lag2():
    return Run(1.0, lag_two())


@pytest.fixture(scope="session")
def run_a2():
    return Run(2.0, two_atoms())


@pytest.fixture(scope="session")
def run_a05():
    return Run(0.5, two_atoms())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
