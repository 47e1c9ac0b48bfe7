import numpy as np
import pytest

from monotone import geometry as geo
from monotone.fields import AnalyticField

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def linear_x1(n, grid=None, model=None):
    def u(P):
        return P[:, 0][None]

    def g(P):
        out = np.zeros((1, n, len(P)))
        out[0, 0] = 1.0
        return out
    return AnalyticField(n, 1, u, g, grid=grid, model=model)


@pytest.fixture
def restore_settings():
    prev = geo.settings()
    yield
    geo.restore(prev)


@pytest.fixture(scope="session")
def grid1():
    return geo.CartesianGrid((-4.0,), (4.0,), (2001,))
