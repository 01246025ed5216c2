import math

import mpmath
import pytest

from conecert.dynamics import SkewProductMap, TrigPolynomial

mpmath.mp.prec = 200


@pytest.fixture
def paper_map():
    return SkewProductMap.paper(1.0)


@pytest.fixture
def zero_map():
    return SkewProductMap(2, TrigPolynomial.zero())


def h_direct(x, n):
    """Direct summation of h_n in 200-bit arithmetic."""
    x = mpmath.mpf(x)
    return sum(mpmath.cos(2**k * mpmath.pi * x) / 2 ** (n - k) for k in range(1, n + 1))


def tau_prime_float(fmap, x):
    return sum(
        2 * math.pi * h.freq * (-h.cos * math.sin(2 * math.pi * h.freq * x) + h.sin * math.cos(2 * math.pi * h.freq * x))
        for h in fmap.tau.harmonics
    )


def tau_float(fmap, x):
    return sum(
        h.cos * math.cos(2 * math.pi * h.freq * x) + h.sin * math.sin(2 * math.pi * h.freq * x)
        for h in fmap.tau.harmonics
    )


# One line per acceptance criterion, filled in by test_acceptance.py and
# printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
