from fractions import Fraction
from math import factorial

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dense_product, fd_gradient
from singular_cert.polycore import (
    DualElement,
    Polynomial,
    derive,
    eval_dual,
    grlex_key,
    is_closed_under_division,
    monomials_of_degree,
    to_exact,
    to_float,
    truncate,
    truncated_integral,
)


def poly_strategy(n, maxdeg=4, coeffs=st.integers(-5, 5)):
    exps = st.tuples(*[st.integers(0, maxdeg)] * n).filter(lambda a: sum(a) <= maxdeg)
    return st.dictionaries(exps, coeffs, max_size=8).map(lambda d: Polynomial(d, n))


@st.composite
def poly_pair(draw):
    n = draw(st.integers(1, 3))
    return draw(poly_strategy(n)), draw(poly_strategy(n))


@settings(max_examples=60, deadline=None)
@given(poly_pair())
def test_product_matches_dense_convolution(pq):
    p, q = pq
    assert (p * q).terms == {a: c for a, c in dense_product(p, q).items()}


@settings(max_examples=60, deadline=None)
@given(poly_pair())
def test_sum_and_scale_match_termwise(pq):
    p, q = pq
    s = p + q
    for a in set(p.terms) | set(q.terms):
        assert s.coefficient(a) == p.coefficient(a) + q.coefficient(a)
    assert (p * 3 - p - p - p) == 0
    assert (p - q) + q == p


@settings(max_examples=40, deadline=None)
@given(poly_pair(), st.data())
def test_evaluation_is_a_ring_homomorphism(pq, data):
    p, q = pq
    x = [Fraction(data.draw(st.integers(-4, 4)), data.draw(st.integers(1, 3))) for _ in range(p.nvars)]
    assert (p * q)(x) == p(x) * q(x)
    assert (p + q)(x) == p(x) + q(x)


@settings(max_examples=40, deadline=None)
@given(poly_strategy(2), st.integers(-3, 3), st.integers(-3, 3))
def test_shift_is_taylor_expansion(p, a, b):
    T = p.shift([Fraction(a), Fraction(b)])
    assert T([Fraction(1, 2), Fraction(-1, 3)]) == p([a + Fraction(1, 2), b - Fraction(1, 3)])


def test_decimal_literals_are_exact():
    assert to_exact("0.003") == Fraction(3, 1000)
    assert to_exact(0.1) == Fraction(1, 10)
    assert to_exact("2/3") == Fraction(2, 3)


def test_mixed_kinds_raise():
    p = Polynomial({(1,): 1}, 1)
    with pytest.raises(TypeError):
        p + Polynomial({(0,): mpmath.mpf(1)}, 1)
    with pytest.raises(TypeError):
        p.evaluate([mpmath.mpf("0.5")])
    assert p.to_float().evaluate([mpmath.mpf("0.5")]) == mpmath.mpf("0.5")
    with pytest.raises(TypeError):
        Polynomial({(0,): 1.5}, 1)


def test_grlex_order():
    assert monomials_of_degree(3, 2) == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]
    assert sorted([(0, 1), (2, 0), (1, 0)], key=grlex_key) == [(1, 0), (0, 1), (2, 0)]


def test_closed_under_division():
    assert is_closed_under_division([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert not is_closed_under_division([(0, 0), (1, 1)])


def test_diff_matches_finite_differences():
    mpmath.mp.dps = 30
    p = Polynomial({(3, 1): 2, (0, 2): -1, (1, 0): 5}, 2).to_float()
    x = [mpmath.mpf("0.3"), mpmath.mpf("-1.2")]
    g = fd_gradient(p.evaluate, x)
    for i in range(2):
        assert abs(p.diff(i)(x) - g[i]) < mpmath.mpf(10) ** -15


def test_derive_and_integrate_are_shifts():
    L = DualElement({(2, 1): 3, (0, 1): 1, (1, 0): 2}, 2)
    assert derive(L, 0).coeffs == {(1, 1): 3, (0, 0): 2}
    assert truncated_integral(L, 0).coeffs == {(2, 0): 2}      # drops terms with d2
    assert truncated_integral(L, 1).coeffs == {(2, 2): 3, (0, 2): 1, (1, 1): 2}
    assert truncate(L, 0).coeffs == {(1, 0): 2}


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), st.integers(-4, 4), max_size=5),
       st.integers(0, 1))
def test_derive_undoes_integral(coeffs, k):
    L = DualElement(coeffs, 2)
    back = derive(truncated_integral(L, k), k)
    assert back.coeffs == truncate(L, k).coeffs


def test_normalized_pairing_is_derivative_over_factorial():
    # (d1^2 d2 / 2!1!)(p) at xi equals d^2/dx1^2 d/dx2 p (xi) / 2
    p = Polynomial({(3, 2): 1, (2, 1): 4}, 2)
    xi = [Fraction(1), Fraction(2)]
    L = DualElement({(2, 1): 1}, 2, xi)
    direct = p.diff(0, 2).diff(1)(xi) / (factorial(2) * factorial(1))
    assert eval_dual(L, p) == direct


def test_pairing_is_dual_to_shifted_monomials():
    xi = [Fraction(1, 2), Fraction(-1)]
    for a in [(0, 0), (1, 0), (1, 2)]:
        L = DualElement({a: 1}, 2, xi)
        for b in [(0, 0), (1, 0), (1, 2), (0, 3)]:
            m = Polynomial.constant(1, 2)
            for k, e in enumerate(b):
                m = m * (Polynomial.variable(k, 2) - xi[k]) ** e
            assert eval_dual(L, m) == (1 if a == b else 0)


def test_apply_symbolic_matches_numeric():
    p = Polynomial({(3, 0): 1, (1, 2): -2, (0, 1): 1}, 2)
    L = DualElement({(1, 0): 2, (0, 2): 3}, 2)
    q = L.apply_symbolic(p)
    xi = [Fraction(1, 3), Fraction(2)]
    assert q(xi) == eval_dual(L.with_anchor(xi), p)


def test_format_round_trip():
    from singular_cert.parsing import parse_polynomial
    p = Polynomial({(3, 0): Fraction(-3, 7), (1, 2): 2, (0, 0): 1}, 2)
    assert parse_polynomial(p.format(), nvars=2) == p


def test_to_float_complex_string():
    z = to_float("1+2i")
    assert z == mpmath.mpc(1, 2)
