import numpy as np
import pytest

from rsrlab.distributions import gaussian_moment


def within_se(est, truth, k=5.0):
    return abs(est.value - truth) <= k * max(est.se, 1e-15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_expectation(coeffs):
    """E[p(g)] for g ~ N(0,1), p given by monomial coefficients."""
    return sum(c * gaussian_moment(j) for j, c in enumerate(coeffs))


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
