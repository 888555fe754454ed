import numpy as np
import pytest

from fopsim.fop_tracer import angular_transmittance, high_na_design, low_na_design

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


FINE = np.arange(0.0, 90.1, 0.25)


@pytest.fixture(scope="session")
def low_na_T():
    return angular_transmittance(low_na_design(), FINE, 4096, 0)


@pytest.fixture(scope="session")
def high_na_T():
    return angular_transmittance(high_na_design(), FINE, 4096, 0)
