"""Newton iteration on the square deflated system and the alpha-theory certificate.

Three conditions are checked at the start point ``(xi_0, mu_0)`` with
``beta = 2 |J0^{-1} F0|``:

* C1: ``beta * gamma_hat < ALPHA0``
* C2: ``L(A_reg,t) * beta < sigma_min(A_reg,t)`` for every degree
* C3: ``L(A_cert) * beta < sigma_min(A_cert)`` with ``A_cert = K_{o+1}``

When they hold, Newton converges quadratically to a point that is an exact
multiple root of ``f_eps = f - E B`` with ``|eps| <= |F1| + L(F1) * beta``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import mpmath

from . import linalg
from .deflate import (
    DeflatedSystem,
    DeflationError,
    build_deflated_system,
    extract_square,
    initial_point,
    perturbed_residual,
)
from .dualspace import (
    MultiplicityStructure,
    assemble_kt,
    build_duals,
    columns_for_degree,
    commutation_row,
    compute_multiplicity_structure,
)
from .hilbparam import RegularityCertificate, certify_regular_basis, g0_equations, numeric_nu
from .polycore import Polynomial, eval_dual, to_float

log = logging.getLogger(__name__)

ALPHA0 = mpmath.mpf("0.26141")


class CertificationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# alpha theory
# ---------------------------------------------------------------------------

@dataclass
class AlphaData:
    beta: object
    gamma_hat: object
    alpha_hat: object
    threshold: object = ALPHA0

    @property
    def passed(self) -> bool:
        return self.alpha_hat < self.threshold


def _shifted(polys: Sequence[Polynomial], point):
    return [p.shift(point) if p else p for p in polys]


def _multinomial(alpha) -> int:
    out = math.factorial(sum(alpha))
    for a in alpha:
        out //= math.factorial(a)
    return out


def gamma_hat(polys: Sequence[Polynomial], point, Jinv) -> object:
    """Upper bound on ``sup_k |J^{-1} D^k F / k!|^{1/(k-1)}``.

    Row ``i`` of ``J^{-1} D^k F / k!`` is the degree-``k`` part ``q_i`` of
    ``sum_r Jinv[i][r] F_r(point + h)``.  Two majorants of the norm of the
    symmetric ``k``-linear map are available and the smaller is kept:

    * coefficient sums: each form is at most ``sum |c_alpha|`` on unit
      vectors, combined over rows in the 2-norm;
    * flattening: the map is ``U (h_1 x ... x h_k)`` for the ``N x n^k``
      unfolding ``U`` of the symmetric tensor, so its norm is at most
      ``sigma_max(U) = sqrt(lambda_max(U U^H))``.  A coefficient ``c_alpha``
      spreads over ``multinomial(alpha)`` tensor entries, which gives
      ``(U U^H)_{ij} = sum c_{i,alpha} conj(c_{j,alpha}) / multinomial(alpha)``;
    * the other flattening, ``(N n^{k-1}) x n``, bounded the same way
      through its ``n x n`` Gram matrix.

    The smallest of the three is kept.
    """
    taylor = _shifted(polys, point)
    maxdeg = max((p.degree() for p in polys if p), default=0)
    best = mpmath.mpf(0)
    slack = 1 + mpmath.mpf(10) ** (3 - mpmath.mp.dps)
    for k in range(2, maxdeg + 1):
        rows = []
        for row in Jinv:
            acc: dict = {}
            for w, T in zip(row, taylor):
                if not T or w == 0:
                    continue
                for a, c in T.terms.items():
                    if sum(a) == k:
                        acc[a] = acc.get(a, 0) + w * c
            rows.append(acc)
        sums = [sum((abs(v) for v in r.values()), mpmath.mpf(0)) for r in rows]
        bound = mpmath.sqrt(sum(s ** 2 for s in sums))
        if bound == 0:
            continue
        N = len(rows)
        G = mpmath.matrix(N, N)
        for i in range(N):
            for j in range(i, N):
                v = sum((c * mpmath.conj(rows[j][a]) / _multinomial(a)
                         for a, c in rows[i].items() if a in rows[j]), mpmath.mpf(0))
                G[i, j] = v
                G[j, i] = mpmath.conj(v)
        lam = max(abs(e) for e in mpmath.eighe(G, eigvals_only=True)) if _is_complex(G) else \
            max(abs(e) for e in mpmath.eigsy(G, eigvals_only=True))
        flat = mpmath.sqrt(lam) * slack
        bound = min(bound, flat, _column_unfolding_norm(rows, len(point), k) * slack)
        best = max(best, bound ** (mpmath.mpf(1) / (k - 1)))
    return best


def _column_unfolding_norm(rows, n: int, k: int):
    """``sigma_max`` of the ``(N n^{k-1}) x n`` unfolding of symmetric tensors given by coefficients."""
    H = mpmath.matrix(n, n)
    rests: dict = {}
    for r in rows:
        for a in r:
            for m in range(n):
                if a[m]:
                    rests.setdefault(a[:m] + (a[m] - 1,) + a[m + 1:], None)
    for beta in rests:
        mb = _multinomial(beta)
        for r in rows:
            vec = {}
            for m in range(n):
                a = beta[:m] + (beta[m] + 1,) + beta[m + 1:]
                if a in r:
                    vec[m] = r[a] / _multinomial(a)
            for a_, va in vec.items():
                for b_, vb in vec.items():
                    H[a_, b_] += mb * mpmath.conj(va) * vb
    lam = max(abs(e) for e in mpmath.eighe(H, eigvals_only=True)) if _is_complex(H) else \
        max(abs(e) for e in mpmath.eigsy(H, eigvals_only=True))
    return mpmath.sqrt(lam)


def _is_complex(G) -> bool:
    return any(isinstance(G[i, j], mpmath.mpc) and G[i, j].imag != 0
               for i in range(G.rows) for j in range(G.cols))


def alpha_test(sys: DeflatedSystem, rows: Sequence[int], point) -> AlphaData:
    J0 = sys.jacobian(point, rows)
    F0 = sys.evaluate(point, rows)
    try:
        Jinv = linalg.inverse(J0)
    except ZeroDivisionError as exc:
        raise CertificationError("J0 is singular at the point") from exc
    step = linalg.matvec(Jinv, F0)
    beta = 2 * linalg.norm2(step)
    g = gamma_hat([sys.float_equations()[r] for r in rows], point, Jinv)
    return AlphaData(beta=beta, gamma_hat=g, alpha_hat=beta * g)


# ---------------------------------------------------------------------------
# Lipschitz bounds
# ---------------------------------------------------------------------------

def lipschitz_bound(matrix: Sequence[Sequence[Polynomial]], point, radius) -> object:
    """``L`` with ``|A(y) - A(z)|_2 <= L |y - z|_2`` for ``y, z`` in the ball.

    Each partial derivative ``d_m a_ij`` is majorized on the ball of radius
    ``b`` by ``sum |c_alpha| b^|alpha|`` over its Taylor coefficients at the
    center; the Frobenius norm of the gradient bounds dominates the spectral
    norm of the difference.
    """
    b = mpmath.mpf(radius)
    if b < 0:
        raise ValueError("radius must be non-negative")
    total = mpmath.mpf(0)
    for row in matrix:
        for a in row:
            if not isinstance(a, Polynomial) or not a or a.degree() < 1:
                continue
            af = a.to_float() if a.kind == "exact" else a
            g2 = mpmath.mpf(0)
            for m in range(af.nvars):
                d = af.diff(m)
                if not d:
                    continue
                T = d.shift(point)
                s = sum((abs(c) * b ** sum(al) for al, c in T.terms.items()), mpmath.mpf(0))
                g2 += s ** 2
            total += g2
    return mpmath.sqrt(total)


def evaluate_matrix(matrix, point) -> list:
    out = []
    for row in matrix:
        r = []
        for a in row:
            if isinstance(a, Polynomial):
                af = a.to_float() if a.kind == "exact" else a
                r.append(af.evaluate(point) if af else mpmath.mpf(0))
            else:
                r.append(to_float(a) if not isinstance(a, (mpmath.mpf, mpmath.mpc)) else a)
        out.append(r)
    return out


def symbolic_acert(sys: DeflatedSystem) -> list:
    """``K_{o+1}`` with entries polynomial in ``(x, mu)``."""
    N = sys.nunknowns
    t = max(sum(b) for b in sys.basis) + 1
    fe = [p.embed(N, list(range(sys.n))) for p in sys.f]
    K = assemble_kt(sys.basis, sys.nu, sys.duals, t, sys.n,
                    lambda L, l: L.apply_symbolic(fe[l]), len(fe),
                    Polynomial.zero(N), Polynomial.constant(1, N))
    return K.rows


def symbolic_areg(sys: DeflatedSystem, cert: RegularityCertificate) -> list:
    """``A_reg,t`` with entries polynomial in ``mu`` for every degree (empty when ``H_t`` is)."""
    N = sys.nunknowns
    out = []
    for rec in cert.records:
        all_cols = columns_for_degree(sys.basis, rec.t, sys.n)
        mat = []
        for r in rec.areg_rows:
            _, s, k, l = rec.row_labels[r]
            full = commutation_row(sys.basis, sys.nu, rec.t, s, k, l, all_cols, Polynomial.zero(N))
            by_col = dict(zip(all_cols, full))
            mat.append([by_col[rec.columns[c]] for c in rec.areg_cols])
        out.append(mat)
    return out


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

@dataclass
class NewtonResult:
    point: list
    residuals_inf: list          # |F0|_inf at x_0, x_1, ...
    residuals_2: list
    betas: list                  # beta recomputed at each iterate
    converged: bool
    quadratic: bool
    rate_constant: object
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.residuals_inf) - 1


def _quadratic_fit(res: Sequence, floor) -> tuple:
    """Largest ``r_{k+1} / r_k^2`` over steps that start below 1e-3 and end above the floor."""
    ratios = [res[k + 1] / res[k] ** 2 for k in range(len(res) - 1)
              if res[k] < mpmath.mpf("1e-3") and res[k] > 0 and res[k + 1] > floor]
    if not ratios:
        # a step that dropped straight to the floor is at least quadratic
        ok = any(res[k] < mpmath.mpf("1e-3") and res[k + 1] <= floor for k in range(len(res) - 1))
        return ok, (mpmath.mpf(0) if ok else None)
    C = max(ratios)
    return C < 100, C


def newton_solve(sys: DeflatedSystem, rows: Sequence[int], start, tol=None, maxiter: int = 30,
                 track_beta: bool = True) -> NewtonResult:
    """Newton on ``F0``; stops when ``|F0|_inf <= tol`` (default ``10^(2 - digits)``)."""
    if tol is None:
        tol = mpmath.mpf(10) ** (2 - mpmath.mp.dps)
    x = list(start)
    res_inf, res_2, betas = [], [], []
    growth = 0
    reason = ""
    converged = False
    for it in range(maxiter + 1):
        F0 = sys.evaluate(x, rows)
        r = linalg.norm_inf(F0)
        res_inf.append(r)
        res_2.append(linalg.norm2(F0))
        if len(res_inf) > 1 and r > res_inf[-2]:
            growth += 1
        else:
            growth = 0
        J0 = sys.jacobian(x, rows)
        try:
            step = linalg.solve(J0, F0)
        except ZeroDivisionError:
            reason = "singular Jacobian"
            break
        betas.append(2 * linalg.norm2(step) if track_beta else None)
        if r <= tol:
            converged = True
            break
        if growth >= 3:
            reason = "diverging residuals"
            break
        if it == maxiter:
            reason = "iteration limit"
            break
        x = [a - d for a, d in zip(x, step)]
    floor = mpmath.mpf(10) ** (1 - mpmath.mp.dps) * max(1, max((abs(v) for v in x), default=1))
    quad, C = _quadratic_fit(res_inf, floor)
    return NewtonResult(x, res_inf, res_2, betas, converged, quad, C, reason)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

@dataclass
class MatrixCheck:
    name: str
    shape: tuple
    sigma_min: object
    sigma_lower: object
    lipschitz: object
    passed: bool


@dataclass
class CertificationReport:
    verdict: str                         # PASS / FAIL
    reasons: list
    nvars: int
    multiplicity: int
    order: int
    basis: list
    hilbert: list
    kernel_singular_values: list         # per integration step
    stop_sigma_min: object
    regular: bool
    regularity: dict
    parameters: list
    mu_names: list
    system_shape: tuple
    stats: dict
    alpha: AlphaData | None = None
    sigma_cert: MatrixCheck | None = None
    sigma_reg: list = field(default_factory=list)
    lipschitz_f1: object = None
    eps_bound: object = None
    eps_measured: dict = field(default_factory=dict)
    newton: NewtonResult | None = None
    split: dict = field(default_factory=dict)
    start_point: list = field(default_factory=list)
    final_point: list = field(default_factory=list)
    full_residual_inf: object = None
    consequence_residual: object = None
    perturbed_system: list = field(default_factory=list)
    perturbation: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    digits: int = 0


def consequence_residual(sys: DeflatedSystem, pert, point) -> object:
    """max |L_i*(f_eps,j)| over all i, j at the fixed point."""
    n = sys.n
    named = dict(zip(sys.mu_names, point[n:]))
    nu = numeric_nu(sys.basis, n, named)
    duals = build_duals(sys.basis, nu, n, tuple(point[:n]), mpmath.mpf(1))
    worst = mpmath.mpf(0)
    for L in duals:
        for g in pert.perturbed:
            worst = max(worst, abs(eval_dual(L, g)))
    return worst


def _check(name, Msym, point, b) -> MatrixCheck:
    M = evaluate_matrix(Msym, point)
    if not M or not M[0]:
        return MatrixCheck(name, (len(M), 0), mpmath.inf, mpmath.inf, mpmath.mpf(0), True)
    smin = linalg.sigma_min(M)
    slow = linalg.sigma_min_lower(M)
    L = lipschitz_bound(Msym, point, b)
    return MatrixCheck(name, linalg.shape(M), smin, slow, L, bool(L * b < slow))


def certify_all(f: Sequence[Polynomial], point, eps=mpmath.mpf("0.01"), *, remove=None,
                rule: str = "threshold", tau=None, newton_tol=None, maxiter: int = 30,
                param_only: bool = False, structure: MultiplicityStructure | None = None,
                ) -> CertificationReport:
    """Structure, regularity certificate, deflation, alpha test and Newton."""
    timings = {}
    t0 = time.perf_counter()
    struct = structure or compute_multiplicity_structure(f, point, eps)
    timings["structure"] = time.perf_counter() - t0
    n = struct.nvars
    t0 = time.perf_counter()
    cert = certify_regular_basis(struct.basis, n)
    timings["regularity"] = time.perf_counter() - t0
    sys = build_deflated_system(f, struct.basis, n)
    reasons = []
    stats = {
        "IM": list(struct.max_integration_matrix()),
        "IM_stop": list(struct.steps[-1].shape) if struct.steps else [0, 0],
        "SC": len(sys.a_indices()),
        "n_mu": len(sys.mu_names),
        "OS": list(sys.shape),
    }
    report = CertificationReport(
        verdict="FAIL", reasons=reasons, nvars=n, multiplicity=struct.multiplicity,
        order=struct.order, basis=[list(b) for b in struct.basis], hilbert=struct.hilbert,
        kernel_singular_values=[[s for s in st.singular_values] for st in struct.steps],
        stop_sigma_min=struct.stop_sigma_min, regular=cert.regular,
        regularity=cert.to_json(),
        parameters=cert.parametrization.params if cert.regular else [],
        mu_names=list(sys.mu_names), system_shape=sys.shape, stats=stats, timings=timings,
        digits=mpmath.mp.dps)
    if not cert.regular:
        reasons.append(f"basis is not regular (degree {cert.failing_degree})")
        return report
    if param_only:
        report.verdict = "PASS"
        return report

    x0 = initial_point(struct, sys)
    report.start_point = x0
    tau = mpmath.mpf(tau) if tau is not None else to_float(eps) if not isinstance(eps, mpmath.mpf) else eps
    try:
        split = extract_square(sys, x0, tau, g0_equations(cert), remove=remove, rule=rule)
    except DeflationError as exc:
        reasons.append(f"deflation: {exc}")
        return report
    report.split = {
        "rule": split.rule,
        "F0": [sys.label_text(p) for p in split.f0_rows],
        "removed": [sys.label_text(p) for p in split.f1_rows],
        "omega": [list(o) for o in split.omega],
        "implied": [sys.label_text(p) for p in split.implied_rows],
        "sigma_min_J0": split.sigma_min_j0,
    }
    t0 = time.perf_counter()
    try:
        alpha = alpha_test(sys, split.f0_rows, x0)
    except CertificationError as exc:
        reasons.append(str(exc))
        return report
    report.alpha = alpha
    b = alpha.beta
    if not alpha.passed:
        reasons.append(f"C1: alpha_hat = {mpmath.nstr(alpha.alpha_hat, 6)} >= {ALPHA0}")
    regs = symbolic_areg(sys, cert)
    for rec, M in zip(cert.records, regs):
        chk = _check(f"A_reg,{rec.t}", M, x0, b)
        report.sigma_reg.append(chk)
        if not chk.passed:
            reasons.append(f"C2: L*beta >= sigma_min for {chk.name}")
    report.sigma_cert = _check("A_cert", symbolic_acert(sys), x0, b)
    if not report.sigma_cert.passed:
        reasons.append("C3: L*beta >= sigma_min for A_cert")
    f1 = [[sys.equations[p]] for p in split.f1_rows]
    F1_0 = sys.evaluate(x0, split.f1_rows)
    report.lipschitz_f1 = lipschitz_bound(f1, x0, b) if f1 else mpmath.mpf(0)
    report.eps_bound = linalg.norm2(F1_0) + report.lipschitz_f1 * b
    timings["certificate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    newton = newton_solve(sys, split.f0_rows, x0, newton_tol, maxiter)
    timings["newton"] = time.perf_counter() - t0
    report.newton = newton
    report.final_point = newton.point
    if not newton.converged:
        reasons.append(f"Newton: {newton.reason}")
    pert = perturbed_residual(sys, split, newton.point)
    report.perturbation = {f"L{i + 1}(f{j + 1})": v for (i, j), v in pert.values.items()}
    report.eps_measured = {"max": pert.max_norm(), "frobenius": pert.frobenius()}
    report.perturbed_system = pert.perturbed
    report.full_residual_inf = linalg.norm_inf(sys.evaluate(newton.point)) if sys.equations else 0
    report.consequence_residual = consequence_residual(sys, pert, newton.point)
    if report.eps_measured["frobenius"] > report.eps_bound:
        reasons.append("measured perturbation exceeds the bound")
    if not reasons:
        report.verdict = "PASS"
    return report
