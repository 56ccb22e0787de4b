import os
import sys
from fractions import Fraction

import mpmath
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from singular_cert.parsing import parse_polynomial  # noqa: E402

MTH191 = ["x1^3 + x2^2 + x3^2 - 1", "x2^3 + x1^2 + x3^2 - 1", "x3^3 + x1^2 + x2^2 - 1"]
MTH191_POINT = [Fraction("0.002"), Fraction("1.003"), Fraction("0.004")]
PAIR_PERTURBED = ["x1^2 + x1 - x2 + 0.003", "x2^2 + 1.004*x1 - x2"]
PAIR_EXACT = ["x1^2 + x1 - x2", "x2^2 + x1 - x2"]
PAIR_POINT = [Fraction("0.001"), Fraction("-0.002")]
EX_BASIS = [(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1)]


def polys(exprs, n=None):
    n = n or max(int(c) for e in exprs for c in __import__("re").findall(r"x(\d+)", e))
    return [parse_polynomial(e, nvars=n) for e in exprs]


@pytest.fixture(autouse=True)
def _precision():
    """Every test starts at 16 digits and leaves the global precision alone."""
    old = mpmath.mp.dps
    mpmath.mp.dps = 16
    yield
    mpmath.mp.dps = old


@pytest.fixture
def mth191():
    return polys(MTH191, 3)


@pytest.fixture
def pair_perturbed():
    return polys(PAIR_PERTURBED, 2)


@pytest.fixture
def pair_exact():
    return polys(PAIR_EXACT, 2)
