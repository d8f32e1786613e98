import numpy as np
import pytest


@pytest.fixture
def nprng():
    return np.random.default_rng(20240611)


def random_spd(rng, d, rank=None):
    B = rng.standard_normal((d, rank or d))
    return B @ B.T / (rank or d)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
