import logging

from hypothesis import HealthCheck, settings
import numpy as np
import pytest

from ssflrd.funcdata import FunctionalCurve, make_grid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_curves(rng, n, p, stencil=True):
    """Random smooth-ish curves; stencil derivatives by default."""
    grid = make_grid(p)
    t = grid.points
    out = []
    for _ in range(n):
        c = rng.normal(size=4)
        values = c[0] + c[1] * t + c[2] * np.sin(2 * np.pi * t) + c[3] * np.cos(2 * np.pi * t)
        if stencil:
            out.append(FunctionalCurve.from_values(values, grid))
        else:
            deriv = c[1] + 2 * np.pi * (c[2] * np.cos(2 * np.pi * t) - c[3] * np.sin(2 * np.pi * t))
            out.append(FunctionalCurve(grid, values, deriv))
    return out


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="ssflrd")
    yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
