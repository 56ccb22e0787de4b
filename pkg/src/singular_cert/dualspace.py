"""Integration method: degree-by-degree construction of a primal-dual basis pair.

Every new functional of degree ``t`` is written as

    L = sum_{j, k} nu[j, k] * integral_k(L_j),   deg(beta_j) < t,

and the unknown coefficients ``nu`` are found as the kernel of the matrix
``K_t`` (commutation rows, pinning rows, and ``L(f_l) = 0`` rows).  The
coefficient of ``L_i`` on column ``(j, k)`` is the normal-form coefficient
``mu[beta_i, beta_j + e_k]``; these tables drive the parametrization, the
deflated system and the certification.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath

from . import linalg
from .polycore import (
    DualElement,
    Monomial,
    Polynomial,
    degree,
    grlex_key,
    is_closed_under_division,
    last_nonzero,
    monomials_of_degree,
    scalar_kind,
    shift_exp,
    to_float,
    truncated_integral,
    eval_dual_taylor,
)

log = logging.getLogger(__name__)

Column = tuple  # (j, k): dual index, axis


class StructureError(RuntimeError):
    """Raised when the integration method cannot produce a valid basis."""


# ---------------------------------------------------------------------------
# coefficient layout
# ---------------------------------------------------------------------------

def columns_for_degree(basis: Sequence[Monomial], t: int, n: int) -> list[Column]:
    """Unknowns ``nu[j, k]`` of a degree-``t`` functional: all ``j`` below degree ``t``."""
    return [(j, k) for j, b in enumerate(basis) if degree(b) < t for k in range(n)]


def owner_column(beta: Monomial, basis: Sequence[Monomial]) -> Column:
    """The column whose coefficient equals ``L(x^beta)`` for every candidate ``L``.

    It integrates along the last variable that ``beta`` involves.
    """
    k = last_nonzero(beta)
    return basis.index(shift_exp(beta, k, -1)), k


@dataclass(frozen=True)
class CoefficientSlot:
    column: Column
    status: str            # "pinned" | "owner" | "free"
    value: int | None      # fixed value for pinned / owner slots
    name: str | None       # e.g. "mu_4_3" for free slots


def layout_for(basis: Sequence[Monomial], i: int, n: int) -> list[CoefficientSlot]:
    """Classify the columns of ``L_i`` by the duality conditions.

    * pinned: ``beta_j + e_k`` is a basis monomial of lower degree, value 0
    * owner: owner column of a basis monomial of degree ``t``; value 1 for
      ``beta_i`` itself and 0 for the others
    * free: an unknown, named ``mu_<i+1>_<m>`` with ``m`` counting free
      columns of ``L_i`` from 1 in column order
    """
    basis = [tuple(b) for b in basis]
    t = degree(basis[i])
    lower = {b for b in basis if degree(b) < t}
    owners = {owner_column(b, basis): b for b in basis if degree(b) == t}
    slots = []
    m = 0
    for (j, k) in columns_for_degree(basis, t, n):
        target = shift_exp(basis[j], k, 1)
        if target in lower:
            slots.append(CoefficientSlot((j, k), "pinned", 0, None))
        elif (j, k) in owners:
            slots.append(CoefficientSlot((j, k), "owner", int(owners[(j, k)] == basis[i]), None))
        else:
            m += 1
            slots.append(CoefficientSlot((j, k), "free", None, f"mu_{i + 1}_{m}"))
    return slots


def free_parameter_names(basis: Sequence[Monomial], n: int) -> list[str]:
    return [s.name for i in range(1, len(basis)) for s in layout_for(basis, i, n) if s.status == "free"]


def build_duals(basis: Sequence[Monomial], nu: Sequence[dict], n: int, anchor=None, one=1):
    """Recursively expand ``L_i = sum nu_i[j,k] * integral_k(L_j)`` into dual coefficients."""
    duals = [DualElement.evaluation(n, anchor, one)]
    cache: dict = {}
    for i in range(1, len(basis)):
        acc: dict = {}
        for (j, k), c in nu[i].items():
            if c == 0:
                continue
            if (j, k) not in cache:
                cache[(j, k)] = truncated_integral(duals[j], k)
            for a, v in cache[(j, k)].coeffs.items():
                acc[a] = acc[a] + v * c if a in acc else v * c
        duals.append(DualElement(acc, n, anchor))
    return duals


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass
class MuTable:
    """``nu[i][(j, k)] = mu[beta_i, beta_j + e_k]`` plus the full dual coefficients."""

    nu: list                      # per dual index: {(j, k): scalar}
    derived: list                 # per dual index: {alpha: scalar}

    def entry(self, i: int, j: int, k: int):
        return self.nu[i].get((j, k), 0)

    def coefficient(self, i: int, alpha: Monomial):
        return self.derived[i].get(tuple(alpha), 0)

    def named(self, basis, n) -> dict:
        """Values of the free slots by name (``mu_4_3`` -> value)."""
        out = {}
        for i in range(1, len(self.nu)):
            for s in layout_for(basis, i, n):
                if s.status == "free":
                    out[s.name] = self.nu[i].get(s.column, 0)
        return out


@dataclass
class StepRecord:
    t: int
    shape: tuple
    singular_values: list
    kernel_dim: int
    pivots: list = field(default_factory=list)
    pivot_rule: str = ""


@dataclass
class MultiplicityStructure:
    point: tuple
    basis: list                   # exponent tuples, degree-sorted, closed under division
    duals: list                   # DualElement per basis monomial
    mu: MuTable
    nvars: int
    kind: str
    steps: list = field(default_factory=list)
    stop_sigma_min: object = None  # smallest singular value of the rejecting K_{o+1}
    stop_matrix: list | None = None

    @property
    def multiplicity(self) -> int:
        return len(self.basis)

    @property
    def order(self) -> int:
        return max(degree(b) for b in self.basis)

    @property
    def hilbert(self) -> list[int]:
        h = [0] * (self.order + 1)
        for b in self.basis:
            h[degree(b)] += 1
        return h

    @property
    def r_t(self) -> list[int]:
        out, acc = [], 0
        for h in self.hilbert:
            acc += h
            out.append(acc)
        return out

    def truncated(self, t: int) -> "MultiplicityStructure":
        keep = [i for i, b in enumerate(self.basis) if degree(b) <= t]
        return MultiplicityStructure(
            point=self.point,
            basis=[self.basis[i] for i in keep],
            duals=[self.duals[i] for i in keep],
            mu=MuTable([self.mu.nu[i] for i in keep], [self.mu.derived[i] for i in keep]),
            nvars=self.nvars, kind=self.kind,
            steps=[s for s in self.steps if s.t <= t],
        )

    def max_integration_matrix(self) -> tuple:
        """Largest ``K_t`` with a nonzero kernel (the rejecting ``K_{o+1}`` excluded)."""
        shapes = [s.shape for s in self.steps if s.kernel_dim > 0]
        return max(shapes, key=lambda s: s[0] * s[1]) if shapes else (0, 0)


@dataclass
class Stabilized:
    """Returned by :func:`integration_step` when ``D_t = D_{t-1}``."""

    sigma_min: object
    record: StepRecord
    matrix: list


# ---------------------------------------------------------------------------
# K_t assembly
# ---------------------------------------------------------------------------

@dataclass
class KtMatrix:
    rows: list
    columns: list                 # (j, k)
    row_labels: list              # ("comm", s, k, l) | ("pin", j, k) | ("f", l)
    n_h_rows: int                 # leading rows belonging to H_t


def commutation_row(basis, nu, t, s, k, l, columns, zero=0):
    """Row of the homogeneous condition on coefficient of ``L_s`` for the pair (k, l)."""
    index = {c: p for p, c in enumerate(columns)}
    row = [zero] * len(columns)
    ds = degree(basis[s])
    for j, b in enumerate(basis):
        if not ds < degree(b) < t:
            continue
        a = nu[j].get((s, l), 0)
        c = nu[j].get((s, k), 0)
        if a != 0:
            row[index[(j, k)]] = row[index[(j, k)]] + a
        if c != 0:
            row[index[(j, l)]] = row[index[(j, l)]] - c
    return row


def assemble_kt(basis, nu, duals, t: int, n: int, apply_f: Callable, n_f: int,
                zero=0, one=1, drop_zero_rows: bool = True) -> KtMatrix:
    """Coefficient matrix ``K_t`` over any coefficient ring.

    ``apply_f(L, l)`` must return ``L(f_l)``; with numeric duals and a Taylor
    expansion this is a number, with parametric duals a polynomial.
    """
    if t < 1:
        raise ValueError("K_t is defined for t >= 1")
    basis = [tuple(b) for b in basis]
    prev = [b for b in basis if degree(b) < t]
    columns = columns_for_degree(basis, t, n)
    rows, labels = [], []
    for s, bs in enumerate(prev):
        if not any(degree(bs) < degree(b) < t for b in prev):
            continue
        for k in range(n):
            for l in range(k + 1, n):
                row = commutation_row(basis, nu, t, s, k, l, columns, zero)
                if drop_zero_rows and all(v == 0 for v in row):
                    continue
                rows.append(row)
                labels.append(("comm", s, k, l))
    prev_set = set(prev)
    for p, (j, k) in enumerate(columns):
        if shift_exp(basis[j], k, 1) in prev_set:
            row = [zero] * len(columns)
            row[p] = one
            rows.append(row)
            labels.append(("pin", j, k))
    n_h = len(rows)
    integrals = {c: truncated_integral(duals[c[0]], c[1]) for c in columns}
    for l in range(n_f):
        rows.append([apply_f(integrals[c], l) for c in columns])
        labels.append(("f", l))
    return KtMatrix(rows, columns, labels, n_h)


# ---------------------------------------------------------------------------
# the integration method
# ---------------------------------------------------------------------------

def choose_mode(f: Sequence[Polynomial], point) -> str:
    """``"exact"`` when the data are rational and the point is an exact root."""
    kinds = {scalar_kind(v) for v in point}
    if kinds == {"exact"} and all(p.kind in ("exact", None) for p in f):
        if all(p.evaluate([Fraction(v) for v in point]) == 0 for p in f):
            return "exact"
    return "float"


def _prepare(f: Sequence[Polynomial], point, mode: str | None = None):
    mode = mode or choose_mode(f, point)
    if mode == "exact":
        pt = tuple(Fraction(v) for v in point)
        polys = list(f)
        kind = "exact"
    else:
        pt = tuple(to_float(v) for v in point)
        polys = [p.to_float() if p.kind == "exact" else p for p in f]
        kind = "float"
    taylors = [p.shift(pt) for p in polys]
    return pt, taylors, kind


def _numeric_apply(taylors):
    def apply_f(L, l):
        return eval_dual_taylor(L, taylors[l])
    return apply_f


def _select_pivots(C, admissible, exact, eps):
    """Choose pivot monomials for the kernel rows ``C`` (dicts monomial -> value).

    Admissible monomials are scanned in graded order; a monomial is taken as
    soon as some remaining row has a coefficient above ``eps`` on it (nonzero
    in exact mode).  Rows are partially pivoted by magnitude.  Returns the
    chosen monomials and the rule that produced them.
    """
    rows = [dict(r) for r in C]
    h = len(rows)
    remaining = list(range(h))
    chosen = []

    def eliminate(r, beta):
        piv = rows[r][beta]
        for q in remaining:
            if q == r:
                continue
            fct = rows[q].get(beta, 0)
            if fct != 0:
                fct = fct / piv
                for a, v in rows[r].items():
                    rows[q][a] = rows[q].get(a, 0) - fct * v
                rows[q][beta] = 0

    for beta in admissible:
        if not remaining:
            break
        best = max(remaining, key=lambda q: abs(rows[q].get(beta, 0)))
        val = abs(rows[best].get(beta, 0))
        if (exact and val != 0) or (not exact and val > eps):
            chosen.append(beta)
            remaining.remove(best)
            eliminate(best, beta)
    rule = "threshold"
    if remaining and not exact:
        # no admissible coefficient clears eps: fall back to the largest one
        rule = "largest"
        while remaining:
            cands = [(abs(rows[q].get(b, 0)), -admissible.index(b), q, b)
                     for q in remaining for b in admissible if b not in chosen]
            if not cands:
                break
            val, _, q, b = max(cands)
            if val <= mpmath.ldexp(1, -mpmath.mp.prec // 2):
                break
            chosen.append(b)
            remaining.remove(q)
            eliminate(q, b)
    if remaining:
        raise StructureError(
            f"kernel of dimension {h} admits only {len(chosen)} pivots that keep "
            "the primal basis closed under division")
    return sorted(chosen, key=grlex_key), rule


def integration_step(f, struct: MultiplicityStructure, eps, taylors=None):
    """One degree of the integration method.

    Returns a :class:`Stabilized` marker if ``ker K_t = 0`` (with ``t`` one
    more than the current order), otherwise the structure extended by the
    new degree-``t`` basis monomials and functionals.
    """
    n = struct.nvars
    t = struct.order + 1
    exact = struct.kind == "exact"
    if not is_closed_under_division(struct.basis):
        raise StructureError("input basis is not closed under division")
    if taylors is None:
        _, taylors, _ = _prepare(f, struct.point, struct.kind)
    zero, one = (Fraction(0), Fraction(1)) if exact else (mpmath.mpf(0), mpmath.mpf(1))
    K = assemble_kt(struct.basis, struct.mu.nu, struct.duals, t, n,
                    _numeric_apply(taylors), len(taylors), zero, one)
    ncols = len(K.columns)
    if exact:
        kernel = linalg.nullspace_exact(K.rows, ncols)
        svals = []
        sigma = Fraction(0) if kernel else None
    else:
        kr = linalg.numeric_kernel(K.rows, eps)
        kernel, svals = kr.kernel_basis, kr.singular_values
        sigma = linalg.sigma_min(K.rows)
    record = StepRecord(t=t, shape=(len(K.rows), ncols), singular_values=svals,
                        kernel_dim=len(kernel))
    if not kernel:
        return Stabilized(sigma_min=sigma if not exact else None, record=record, matrix=K.rows)

    basis = list(struct.basis)
    prev = set(basis)
    cand = [b for b in monomials_of_degree(n, t)
            if all(shift_exp(b, k, -1) in prev for k in range(n) if b[k] > 0)]
    # coefficient of kernel element on an admissible monomial = its owner column
    col_index = {c: p for p, c in enumerate(K.columns)}
    C = [{b: v[col_index[owner_column(b, basis)]] for b in cand} for v in kernel]
    pivots, rule = _select_pivots(C, cand, exact, eps)
    record.pivots, record.pivot_rule = pivots, rule

    # reduce the kernel basis so that each new functional is dual to one pivot
    P = [[row[b] for b in pivots] for row in C]
    if exact:
        Pinv = _exact_inverse(P)
    else:
        Pinv = linalg.inverse(P)
    h = len(pivots)
    new_vectors = [[sum((Pinv[a][q] * kernel[q][c] for q in range(h)), zero) for c in range(ncols)]
                   for a in range(h)]
    # new_vectors[a] has coefficient 1 on pivots[a], 0 on the other pivots
    new_basis = basis + pivots
    if not is_closed_under_division(new_basis):
        raise StructureError(f"pivots {pivots} break closure under division")

    nu = [dict(x) for x in struct.mu.nu]
    for a, beta in enumerate(pivots):
        i = len(basis) + a
        slots = layout_for(new_basis, i, n)
        vec = {}
        for s in slots:
            if s.status == "free":
                v = new_vectors[a][col_index[s.column]]
                if not exact and isinstance(v, mpmath.mpc) and v.imag == 0:
                    v = v.real
                vec[s.column] = v
            else:
                vec[s.column] = zero + s.value
        nu.append(vec)
    anchor = struct.point
    duals = build_duals(new_basis, nu, n, anchor, one)
    derived = [dict(L.coeffs) for L in duals]
    out = MultiplicityStructure(
        point=struct.point, basis=new_basis, duals=duals, mu=MuTable(nu, derived),
        nvars=n, kind=struct.kind, steps=struct.steps + [record])
    return out


def _exact_inverse(P):
    h = len(P)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(h)] for i, row in enumerate(P)]
    R, piv = linalg.rref(aug)
    if piv[:h] != list(range(h)):
        raise StructureError("singular pivot block")
    return [row[h:] for row in R]


def initial_structure(f, point, mode: str | None = None) -> MultiplicityStructure:
    pt, _, kind = _prepare(f, point, mode)
    n = len(pt)
    one = Fraction(1) if kind == "exact" else mpmath.mpf(1)
    L1 = DualElement.evaluation(n, pt, one)
    return MultiplicityStructure(point=pt, basis=[(0,) * n], duals=[L1],
                                 mu=MuTable([{}], [dict(L1.coeffs)]), nvars=n, kind=kind)


def compute_multiplicity_structure(f: Sequence[Polynomial], point, eps=Fraction(1, 100),
                                   max_degree: int | None = None,
                                   mode: str | None = None) -> MultiplicityStructure:
    """Run the integration method from ``L_1 = 1_xi`` until the dual stabilizes.

    ``mode`` is ``"exact"`` or ``"float"``; by default exact arithmetic is
    used only when ``f`` is rational and ``point`` is an exact rational root,
    otherwise mpmath floats at the ambient precision.
    """
    if not eps > 0:
        raise ValueError("tolerance must be positive")
    struct = initial_structure(f, point, mode)
    n = struct.nvars
    if any(p.nvars != n for p in f):
        raise ValueError("point dimension does not match the system")
    if struct.kind == "float":
        eps = to_float(eps) if not isinstance(eps, (mpmath.mpf,)) else eps
    cap = max_degree if max_degree is not None else 2 * max(p.degree() for p in f) * n
    _, taylors, _ = _prepare(f, struct.point, struct.kind)
    while True:
        t = struct.order + 1
        if t > cap + 1:
            raise StructureError(f"integration method did not stabilize below degree {cap}")
        res = integration_step(f, struct, eps, taylors)
        if isinstance(res, Stabilized):
            struct.steps = struct.steps + [res.record]
            struct.stop_sigma_min = res.sigma_min
            struct.stop_matrix = res.matrix
            log.debug("stabilized at t=%d (sigma_min=%s)", t, res.sigma_min)
            return struct
        struct = res
        log.debug("t=%d: new basis monomials %s", t, res.steps[-1].pivots)


def multiplication_matrices(struct: MultiplicityStructure) -> list:
    """``M_k[i][j] = mu[beta_i, beta_j + e_k]`` (zero unless deg beta_j < deg beta_i)."""
    r, n = struct.multiplicity, struct.nvars
    zero = Fraction(0) if struct.kind == "exact" else mpmath.mpf(0)
    mats = []
    for k in range(n):
        M = [[zero] * r for _ in range(r)]
        for i in range(r):
            for (j, kk), v in struct.mu.nu[i].items():
                if kk == k:
                    M[i][j] = v
        mats.append(M)
    return mats


def duality_matrix(struct: MultiplicityStructure):
    """``[L_i(x_xi^beta_j)]``, read directly off the normalized coefficients."""
    return [[L.coefficient(b) for b in struct.basis] for L in struct.duals]


def derivation_residual(struct: MultiplicityStructure):
    """Max coefficient of ``d_k L_i - sum_j mu[beta_i, beta_j+e_k] L_j`` over all i, k."""
    worst = 0
    for i, L in enumerate(struct.duals):
        for k in range(struct.nvars):
            d = L.derive(k)
            acc = dict(d.coeffs)
            for (j, kk), v in struct.mu.nu[i].items():
                if kk != k or v == 0:
                    continue
                for a, c in struct.duals[j].coeffs.items():
                    acc[a] = acc.get(a, 0) - v * c
            for c in acc.values():
                if abs(c) > worst:
                    worst = abs(c)
    return worst


def commutation_residual(struct: MultiplicityStructure):
    """Max |residual| of the commutation relations over all (i, s, k, l)."""
    basis, nu, n = struct.basis, struct.mu.nu, struct.nvars
    worst = 0
    for i, bi in enumerate(basis):
        for s, bs in enumerate(basis):
            if not degree(bs) < degree(bi):
                continue
            for k in range(n):
                for l in range(n):
                    if k == l:
                        continue
                    acc = 0
                    for j, bj in enumerate(basis):
                        if degree(bs) < degree(bj) < degree(bi):
                            acc += nu[i].get((j, k), 0) * nu[j].get((s, l), 0) \
                                - nu[i].get((j, l), 0) * nu[j].get((s, k), 0)
                    if abs(acc) > worst:
                        worst = abs(acc)
    return worst
