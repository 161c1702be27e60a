import numpy as np
import pytest

from deltanls.grid import make_grid, wavefield


@pytest.fixture(scope="session")
def grid():
    return make_grid(1024, 40.0)


@pytest.fixture(scope="session")
def fine_grid():
    return make_grid(4096, 40.0)


def gaussian(g, x0=0.0, amp=1.0, sigma=1.0, k=0.0):
    return wavefield(g, amp * np.exp(-((g.x - x0) ** 2) / (2 * sigma**2)) * np.exp(1j * k * g.x))


@pytest.fixture
def gauss():
    return gaussian


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
