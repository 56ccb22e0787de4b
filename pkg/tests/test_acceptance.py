"""Acceptance suite: one PASS/FAIL line per criterion at the required tolerances.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed even when
output capture is on) or ``python3 tests/test_acceptance.py``.
"""

import random
import sys
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from conftest import EX_BASIS, MTH191, MTH191_POINT, PAIR_EXACT, PAIR_PERTURBED, PAIR_POINT, polys
from oracles import (dual_vector, engineered_system, lipschitz_violations, macaulay_dual, pipeline,
                     sampled_gamma_fast, span_contains)
from singular_cert import certify as ct
from singular_cert import dualspace as ds
from singular_cert import fixtures
from singular_cert import hilbparam as hp
from singular_cert.linalg import matmul

EPS = Fraction(1, 100)


def _emit(num, title, checks, capsys=None):
    ok = all(c[1] for c in checks)
    head = f"criterion {num} {'PASS' if ok else 'FAIL'}  {title}"
    body = "\n".join(f"    [{'ok' if c[1] else 'XX'}] {c[0]}: {c[2]}" for c in checks)
    text = head + "\n" + body
    if capsys is not None:
        with capsys.disabled():
            print("\n" + text)
    else:
        print(text)
    return ok


def _close(got, want, tol):
    return abs(got - mpmath.mpf(want)) <= tol


# ---------------------------------------------------------------------------

def criterion_1():
    checks = []
    with mpmath.workdps(32):
        f = polys(MTH191, 3)
        t0 = time.perf_counter()
        S = ds.compute_multiplicity_structure(f, MTH191_POINT, EPS)
        elapsed = time.perf_counter() - t0
        sv = S.steps[0].singular_values
        want = ["4.1421", "0.0064", "0.0012"]
        checks.append(("K1 singular values within 5e-4",
                       len(sv) == 3 and all(_close(g, w, 5e-4) for g, w in zip(sv, want)),
                       ", ".join(mpmath.nstr(s, 6) for s in sv)))
        checks.append(("r = 4, o = 2", S.multiplicity == 4 and S.order == 2, f"r={S.multiplicity} o={S.order}"))
        checks.append(("B = {1, x1, x3, x1x3}", S.basis == EX_BASIS, str(S.basis)))
        checks.append(("sigma_min(K3) = 0.21549 within 1e-4", _close(S.stop_sigma_min, "0.21549", 1e-4),
                       mpmath.nstr(S.stop_sigma_min, 6)))
        checks.append(("runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f} s"))
    return "multiplicity structure of mth191", checks


def criterion_2():
    cert = hp.certify_regular_basis(EX_BASIS, 3)
    par = cert.parametrization
    sym = dict(zip(par.names, par.field.gens))
    dep = par.dependent()
    checks = [
        ("basis is regular", cert.regular, cert.reason or "-"),
        ("mu_4_3 = mu_2_1 mu_4_2 + mu_3_1", dep.get("mu_4_3") == sym["mu_2_1"] * sym["mu_4_2"] + sym["mu_3_1"],
         str(dep.get("mu_4_3").as_expr())),
        ("mu_4_4 = 1", dep.get("mu_4_4") == 1, str(dep.get("mu_4_4").as_expr())),
        ("mu_4_5 = mu_2_1 + mu_3_1 mu_4_6", dep.get("mu_4_5") == sym["mu_2_1"] + sym["mu_3_1"] * sym["mu_4_6"],
         str(dep.get("mu_4_5").as_expr())),
        ("free parameters", par.params == ["mu_2_1", "mu_3_1", "mu_4_1", "mu_4_2", "mu_4_6"], str(par.params)),
        ("det A_reg,2 = 1 exactly", cert.records[1].det == 1, str(cert.records[1].det.as_expr())),
    ]
    return "exact parametrization of the example basis", checks


def criterion_3():
    with mpmath.workdps(32):
        _, _, sys_, _, split, _ = pipeline(polys(MTH191, 3), MTH191_POINT, EPS)
    removed = [sys_.label_text(p) for p in split.f1_rows]
    checks = [
        ("15 equations, 11 unknowns", sys_.shape == (15, 11), f"{sys_.shape[0]} x {sys_.shape[1]}"),
        ("4 removed rows, all of type L_i(f_j)", len(removed) == 4 and all(sys_.labels[p][0] == "c"
                                                                            for p in split.f1_rows),
         ", ".join(removed)),
        ("sigma_min(J0) > 0.01", split.sigma_min_j0 > 0.01, mpmath.nstr(split.sigma_min_j0, 6)),
    ]
    return "deflated system of mth191", checks


def _trace_factor3(got, want):
    return len(got) >= len(want) and all(mpmath.mpf(w) / 3 <= g <= 3 * mpmath.mpf(w) for g, w in zip(got, want))


def criterion_4():
    want = ["0.00603", "4.0e-5", "2.07e-9", "8.6e-18", "3.55e-35"]
    checks = []
    with mpmath.workdps(32):
        rep = ct.certify_all(polys(MTH191, 3), MTH191_POINT, EPS)
        a = rep.alpha
        tr = rep.newton.residuals_inf
        checks.append(("beta = 0.01302 within 1e-4", _close(a.beta, "0.01302", 1e-4), mpmath.nstr(a.beta, 6)))
        checks.append(("alpha_hat < 0.26141", a.alpha_hat < ct.ALPHA0,
                       f"{mpmath.nstr(a.alpha_hat, 5)} (gamma_hat {mpmath.nstr(a.gamma_hat, 5)})"))
        checks.append(("32-digit trace within factor 3", _trace_factor3(tr, want),
                       ", ".join(mpmath.nstr(r, 3) for r in tr)))
        checks.append(("final |F|_inf <= 1e-30", rep.full_residual_inf <= mpmath.mpf("1e-30"),
                       mpmath.nstr(rep.full_residual_inf, 3)))
        checks.append(("verdict PASS", rep.verdict == "PASS", "; ".join(rep.reasons) or "-"))
    with mpmath.workdps(16):
        rep16 = ct.certify_all(polys(MTH191, 3), MTH191_POINT, EPS)
        tr16 = rep16.newton.residuals_inf
        checks.append(("16-digit trace matches through 2.07e-9", _trace_factor3(tr16, want[:3]),
                       ", ".join(mpmath.nstr(r, 3) for r in tr16)))
        # the iteration stops at the 16-digit roundoff floor
        checks.append(("16-digit run ends at the precision floor (<= 1e-14)",
                       rep16.newton.converged and tr16[-1] <= mpmath.mpf("1e-14"), mpmath.nstr(tr16[-1], 3)))
    return "alpha certificate and Newton on mth191", checks


def criterion_5():
    checks = []
    with mpmath.workdps(32):
        f = polys(PAIR_PERTURBED, 2)
        rep = ct.certify_all(f, PAIR_POINT, EPS, remove=[(0, 0), (1, 1)])
        checks.append(("r = 3, B = {1, x1, x1^2}", rep.multiplicity == 3 and rep.basis == [[0, 0], [1, 0], [2, 0]],
                       str(rep.basis)))
        e11, e22 = rep.perturbation.get("L1(f1)"), rep.perturbation.get("L2(f2)")
        checks.append(("eps* = (0.003, 0.004) within 1e-6",
                       e11 is not None and e22 is not None and _close(e11, "0.003", 1e-6) and _close(e22, "0.004", 1e-6),
                       f"({mpmath.nstr(e11, 8)}, {mpmath.nstr(e22, 8)})"))
        checks.append(("eps_bound >= |eps*|", rep.eps_bound >= rep.eps_measured["frobenius"],
                       f"{mpmath.nstr(rep.eps_bound, 4)} >= {mpmath.nstr(rep.eps_measured['frobenius'], 4)}"))
        rep2 = ct.certify_all(f, PAIR_POINT, EPS, remove=[(0, 0), (0, 1)])
        xi = rep2.final_point[:2]
        checks.append(("fixed point (0.00066578, -0.00133245) within 1e-5",
                       _close(xi[0], "0.00066578", 1e-5) and _close(xi[1], "-0.00133245", 1e-5),
                       f"({mpmath.nstr(xi[0], 8)}, {mpmath.nstr(xi[1], 8)})"))
    return "perturbed two-variable example", checks


def criterion_6(count=20):
    bad = []
    for seed in range(count):
        rng = random.Random(1000 + seed)
        n = rng.choice([2, 3])
        options = ([[1, 2], [2, 2], [2, 3], [1, 5], [1, 6], [3, 2], [1, 3]] if n == 2
                   else [[1, 1, 2], [1, 2, 2], [1, 1, 4], [2, 1, 3], [1, 1, 3], [1, 3, 2], [1, 1, 5]])
        degs = rng.choice(options)
        f, xi = engineered_system(rng, n, degs)
        S = ds.compute_multiplicity_structure(f, xi)
        dims, cols, K = macaulay_dual(f, xi)
        r = int(np.prod(degs))
        ok = S.multiplicity == len(K) == r
        ok = ok and all(span_contains(K, dual_vector(L, cols)) for L in S.duals)
        M = ds.multiplication_matrices(S)
        ok = ok and all(matmul(M[a], M[b]) == matmul(M[b], M[a])
                        for a in range(len(M)) for b in range(a + 1, len(M)))
        if not ok:
            bad.append(seed)
    checks = [(f"{count} engineered systems (n <= 3, r <= 6) agree with the Macaulay oracle",
               not bad, f"failures: {bad or 'none'}")]
    return "oracle equivalence", checks


def criterion_7(pairs=1000):
    rng = np.random.default_rng(2024)
    g_bad, l_bad, details = [], [], []
    for name in fixtures.names():
        sf = fixtures.load(name)
        with mpmath.workdps(16):
            _, cert, sys_, x0, split, alpha = pipeline(sf.polys, sf.point, sf.tol)
            complex_ = any(isinstance(v, mpmath.mpc) for v in x0)
            F = [sys_.float_equations()[r] for r in split.f0_rows]
            Jinv = mpmath.inverse(mpmath.matrix(sys_.jacobian(x0, split.f0_rows))).tolist()
            g = sampled_gamma_fast(F, x0, Jinv, pairs, rng, complex_)
            if g > float(alpha.gamma_hat) * (1 + 1e-6) + 1e-9:
                g_bad.append(name)
            mats = {"A_cert": ct.symbolic_acert(sys_)}
            for rec, M in zip(cert.records, ct.symbolic_areg(sys_, cert)):
                if M and M[0]:
                    mats[f"A_reg,{rec.t}"] = M
            if split.f1_rows:
                mats["F1"] = [[sys_.equations[p]] for p in split.f1_rows]
            nviol = 0
            for M in mats.values():
                L = ct.lipschitz_bound(M, x0, alpha.beta)
                nviol += lipschitz_violations(M, L, x0, alpha.beta, sys_.nunknowns, rng, complex_, pairs)
            if nviol:
                l_bad.append(name)
            details.append(f"{name}: gamma {g:.3g} <= {float(alpha.gamma_hat):.3g}")
    ids = hp.commutation_identities(hp.certify_regular_basis(EX_BASIS, 3))
    checks = [
        (f"gamma_hat >= sampled gamma ({pairs} directions per fixture)", not g_bad,
         "; ".join(details)),
        (f"Lipschitz bounds hold on {pairs} random pairs per fixture and matrix", not l_bad,
         f"violating fixtures: {l_bad or 'none'}"),
        ("parametrization substituted into all commutation equations is zero",
         bool(ids) and all(v == 0 for _, v in ids), f"{len(ids)} identities"),
    ]
    return "soundness suites", checks


def criterion_8():
    with mpmath.workdps(32):
        rep = ct.certify_all(polys(PAIR_EXACT, 2), PAIR_POINT, EPS)
        ulp = mpmath.mpf(10) ** (1 - mpmath.mp.dps)
        target = [0, 0, 1, 1, 1]
        dist = max(abs(a - b) for a, b in zip(rep.final_point, target))
        eps = rep.eps_measured.get("max", mpmath.inf)
        checks = [
            ("Newton converges quadratically", rep.newton.converged and rep.newton.quadratic,
             ", ".join(mpmath.nstr(r, 3) for r in rep.newton.residuals_inf)),
            ("limit (0, 0, 1, 1, 1) within 100 ulp", len(rep.final_point) == 5 and dist <= 100 * ulp,
             mpmath.nstr(dist, 3)),
            ("eps* = 0 within 100 ulp", eps <= 100 * ulp, mpmath.nstr(eps, 3)),
        ]
    return "exact root recovery", checks


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8]


@pytest.mark.parametrize("num", range(1, len(CRITERIA) + 1))
def test_criterion(num, capsys):
    title, checks = CRITERIA[num - 1]()
    assert _emit(num, title, checks, capsys), [c for c in checks if not c[1]]


if __name__ == "__main__":
    results = [_emit(k, *fn()) for k, fn in enumerate(CRITERIA, start=1)]
    sys.exit(0 if all(results) else 1)
