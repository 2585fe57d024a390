import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def horizontal_ramp(height, width, step=0.1):
    return np.tile(step * np.arange(width, dtype=float), (height, 1))


def vertical_ramp(height, width, step=0.1):
    return horizontal_ramp(width, height, step).T


_criteria = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed again in the terminal summary."""

    def record(number, passed, detail):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        line = f"criterion {number}: {status}  {detail}"
        print(line)
        _criteria.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criteria):
            terminalreporter.write_line(line)
