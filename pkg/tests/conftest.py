import numpy as np
import pytest
from hypothesis import settings

from sqha.spatial import Grid1D

settings.register_profile("sqha", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("sqha")


@pytest.fixture(scope="session")
def grid40():
    return Grid1D(40.0, 1024)


def gaussian_density(grid, sigma=1.0, center=0.0):
    x = grid.wrap(grid.q - center)
    n = np.exp(-x**2 / (2 * sigma**2))
    return n / (grid.spacing * n.sum())


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
