import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import EX_BASIS, MTH191_POINT, PAIR_POINT, polys
from oracles import dual_vector, engineered_system, macaulay_dual, span_contains
from singular_cert import dualspace as ds
from singular_cert import fixtures
from singular_cert.linalg import matmul
from singular_cert.parsing import parse_polynomial


@pytest.fixture
def ex73(mth191):
    mpmath.mp.dps = 32
    return ds.compute_multiplicity_structure(mth191, MTH191_POINT, Fraction(1, 100))


def test_k1_singular_values(ex73):
    sv = ex73.steps[0].singular_values
    for got, want in zip(sv, ["4.1421", "0.0064", "0.0012"]):
        assert abs(got - mpmath.mpf(want)) < 5e-4


def test_example_basis_and_order(ex73):
    assert ex73.multiplicity == 4
    assert ex73.order == 2
    assert ex73.basis == EX_BASIS
    assert ex73.hilbert == [1, 2, 1]


def test_rejecting_matrix_sigma(ex73):
    assert abs(ex73.stop_sigma_min - mpmath.mpf("0.21549")) < 1e-4
    assert ex73.steps[-1].kernel_dim == 0


def test_example_mu_values(ex73):
    want = {"mu_2_1": "-0.00117", "mu_3_1": "-0.00235", "mu_4_1": "5.9e-6", "mu_4_2": "-0.00002",
            "mu_4_3": "-0.00235", "mu_4_4": "1.0", "mu_4_5": "-0.00117", "mu_4_6": "-0.00002"}
    got = ex73.mu.named(ex73.basis, 3)
    for k, v in want.items():
        assert abs(got[k] - mpmath.mpf(v)) < 5e-6, k


def test_example_first_order_duals(ex73):
    L2, L3 = ex73.duals[1], ex73.duals[2]
    assert L2.coefficient((1, 0, 0)) == 1
    assert abs(L2.coefficient((0, 1, 0)) + mpmath.mpf("0.00117")) < 5e-6
    assert L3.coefficient((0, 0, 1)) == 1
    assert abs(L3.coefficient((0, 1, 0)) + mpmath.mpf("0.00235")) < 5e-6


def test_duality_is_exact_after_snapping(ex73):
    D = ds.duality_matrix(ex73)
    for i, row in enumerate(D):
        for j, v in enumerate(row):
            assert v == (1 if i == j else 0)


def test_closed_under_derivation(ex73):
    assert ds.derivation_residual(ex73) < mpmath.mpf(10) ** -28
    assert ds.commutation_residual(ex73) < mpmath.mpf(10) ** -28


def test_perturbed_pair_basis(pair_perturbed):
    mpmath.mp.dps = 32
    S = ds.compute_multiplicity_structure(pair_perturbed, PAIR_POINT, Fraction(1, 100))
    assert S.basis == [(0, 0), (1, 0), (2, 0)]
    # approximate duals: 1, d1 + 1.00099651 d2, d1^2 + 1.00099651 d1 d2 + 1.00266222 d2^2 + 0.99933 d2
    L2, L3 = S.duals[1], S.duals[2]
    assert abs(L2.coefficient((0, 1)) - mpmath.mpf("1.00099651")) < 1e-7
    assert abs(L3.coefficient((1, 1)) - mpmath.mpf("1.00099651")) < 1e-3
    assert abs(L3.coefficient((0, 2)) - mpmath.mpf("1.00266222")) < 1e-7


def test_exact_pair_structure(pair_exact):
    S = ds.compute_multiplicity_structure(pair_exact, [0, 0])
    assert S.kind == "exact"
    assert S.basis == [(0, 0), (1, 0), (2, 0)]
    # 1, d1 + d2, d1^2 + d1 d2 + d2^2 + d2 in the normalized basis
    assert S.duals[1].coeffs == {(1, 0): 1, (0, 1): 1}
    assert S.duals[2].coeffs == {(2, 0): 1, (1, 1): 1, (0, 2): 1, (0, 1): 1}


def test_simple_root():
    f = polys(["x1 - 1", "x2 + 2"], 2)
    S = ds.compute_multiplicity_structure(f, [1, -2])
    assert S.multiplicity == 1
    assert S.basis == [(0, 0)]


@pytest.mark.parametrize("name, r", [("decker2", 4), ("ojika2", 2), ("ojika3", 4)])
def test_benchmark_multiplicities_match_oracle(name, r):
    sf = fixtures.load(name)
    S = ds.compute_multiplicity_structure(sf.polys, sf.point)
    dims, cols, K = macaulay_dual(sf.polys, sf.point)
    assert S.multiplicity == r == len(K)
    assert all(span_contains(K, dual_vector(L, cols)) for L in S.duals)


def test_caprasse_multiplicity():
    mpmath.mp.dps = 32
    sf = fixtures.load("caprasse")
    S = ds.compute_multiplicity_structure(sf.polys, sf.point, Fraction(1, 100))
    assert S.multiplicity == 4
    assert ds.commutation_residual(S) < mpmath.mpf(10) ** -25


def test_multiplication_matrices_commute_on_example(ex73):
    M = ds.multiplication_matrices(ex73)
    for a in range(3):
        for b in range(a + 1, 3):
            AB, BA = matmul(M[a], M[b]), matmul(M[b], M[a])
            assert max(abs(x - y) for ra, rb in zip(AB, BA) for x, y in zip(ra, rb)) < 1e-28


def test_degree_cap():
    f = polys(["x1^4"], 1)
    with pytest.raises(ds.StructureError):
        ds.compute_multiplicity_structure(f, [0], max_degree=1)
    # non-isolated: the cap stops the loop
    g = [parse_polynomial("x1*x2", nvars=2)]
    with pytest.raises(ds.StructureError):
        ds.compute_multiplicity_structure(g, [0, 0])


def test_layout_names_and_status():
    slots = ds.layout_for(EX_BASIS, 3, 3)
    status = {s.column: (s.status, s.value, s.name) for s in slots}
    assert status[(0, 0)] == ("pinned", 0, None)          # 1 * x1 = x1 lies in B_1
    assert status[(1, 2)] == ("owner", 1, None)           # x1 * x3 = beta_4
    assert status[(2, 0)][2] == "mu_4_4"
    assert [s.name for s in slots if s.status == "free"] == [f"mu_4_{m}" for m in range(1, 7)]


def test_layout_pins_lower_basis_monomials():
    slots = ds.layout_for([(0, 0), (1, 0), (2, 0)], 2, 2)
    st_ = {s.column: s.status for s in slots}
    assert st_[(0, 0)] == "pinned"        # 1 * x1 = x1 in B_1
    assert st_[(1, 0)] == "owner"


def test_kt_rows_are_sorted_blocks(ex73):
    sub = ex73.truncated(1)
    K = ds.assemble_kt(sub.basis, sub.mu.nu, sub.duals, 2, 3,
                       lambda L, l: L(parse_polynomial("0", nvars=3)), 0, 0, 1)
    kinds = [lb[0] for lb in K.row_labels]
    assert kinds == sorted(kinds, key=["comm", "pin", "f"].index)
    assert K.n_h_rows == len(kinds)


def _random_case(seed):
    rng = random.Random(seed)
    n = rng.choice([2, 3])
    options = ([[1, 2], [2, 2], [2, 3], [1, 5], [1, 6], [3, 2], [1, 3]] if n == 2
               else [[1, 1, 2], [1, 2, 2], [1, 1, 4], [2, 1, 3], [1, 1, 3], [1, 3, 2], [1, 1, 5]])
    degs = rng.choice(options)
    f, xi = engineered_system(rng, n, degs)
    return f, xi, degs


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10 ** 6))
def test_oracle_equivalence(seed):
    f, xi, degs = _random_case(seed)
    S = ds.compute_multiplicity_structure(f, xi)
    dims, cols, K = macaulay_dual(f, xi)
    expected = 1
    for d in degs:
        expected *= d
    assert S.multiplicity == len(K) == expected
    assert [sum(S.hilbert[:t + 1]) for t in range(len(S.hilbert))] == dims
    assert all(span_contains(K, dual_vector(L, cols)) for L in S.duals)
    M = ds.multiplication_matrices(S)
    for a in range(len(M)):
        for b in range(a + 1, len(M)):
            assert matmul(M[a], M[b]) == matmul(M[b], M[a])
