"""Exact rational parametrization of the regular stratum and regularity certificates.

For a primal basis ``B`` closed under division, degree by degree:

* the lower functionals are already rational functions of the free
  parameters found so far;
* ``H_t`` (commutation rows, pinned columns removed) is built over
  ``Q(mu)``, row denominators are cleared and a fraction-free elimination
  picks an invertible block ``A_reg,t`` whose columns avoid the owner
  columns ``nu''``;
* if every other row of ``H_t`` lies in the row span of ``A_reg,t`` the
  degree is regular and ``nu' = -A^{-1} (B nu'' + C nu_bar)`` gives the new
  coefficients as rational functions, with ``nu_bar`` the new parameters.

Rational functions live in a sympy fraction field over ``QQ``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
from sympy import QQ
from sympy.polys.fields import field as frac_field

from .dualspace import (
    build_duals,
    columns_for_degree,
    commutation_row,
    layout_for,
)
from .polycore import degree, is_closed_under_division, to_float


# ---------------------------------------------------------------------------
# fraction-free elimination over Q[mu]
# ---------------------------------------------------------------------------

def clear_row_denominators(row):
    """Scale a row of fraction-field elements to polynomials; returns (poly row, multiplier)."""
    ring = row[0].field.ring
    mult = ring.one
    for v in row:
        if v != 0:
            mult = mult.lcm(v.denom)
    out = []
    for v in row:
        if v == 0:
            out.append(ring.zero)
        else:
            q = v.numer * mult.exquo(v.denom)
            out.append(q)
    return out, mult


@dataclass
class EliminationResult:
    rank: int
    pivot_rows: list          # original row indices, in pivot order
    pivot_cols: list          # column indices, in pivot order
    reduced: list             # fraction-free reduced matrix (rows permuted)
    residual_rows: list       # original indices of non-pivot rows
    residual_zero: bool       # all residual rows vanished in every column


def bareiss(rows, allowed_cols: Sequence[int], ncols: int) -> EliminationResult:
    """Fraction-free elimination with pivots restricted to ``allowed_cols``.

    Pivot choice per step: the first allowed column (in the given order)
    holding a nonzero constant in some remaining row; failing that the
    first allowed column with any nonzero entry.
    """
    M = [list(r) for r in rows]
    m = len(M)
    order = list(range(m))
    prev = None
    pivot_cols = []
    k = 0
    allowed = list(allowed_cols)
    while k < m:
        choice = None
        for want_const in (True, False):
            for c in allowed:
                if c in pivot_cols:
                    continue
                for r in range(k, m):
                    v = M[r][c]
                    if v != 0 and (not want_const or v.is_ground):
                        choice = (r, c)
                        break
                if choice:
                    break
            if choice:
                break
        if choice is None:
            break
        r, c = choice
        M[k], M[r] = M[r], M[k]
        order[k], order[r] = order[r], order[k]
        piv = M[k][c]
        for i in range(k + 1, m):
            a = M[i][c]
            new = []
            for j in range(ncols):
                v = piv * M[i][j] - a * M[k][j]
                if prev is not None:
                    v = v.exquo(prev)
                new.append(v)
            M[i] = new
        prev = piv
        pivot_cols.append(c)
        k += 1
    residual_zero = all(v == 0 for i in range(k, m) for v in M[i])
    return EliminationResult(k, order[:k], pivot_cols, M, order[k:], residual_zero)


def solve_field(A, B):
    """Solve ``A X = B`` over a field (lists of rows), Gauss-Jordan with nonzero pivots."""
    n = len(A)
    M = [list(A[i]) + list(B[i]) for i in range(n)]
    for c in range(n):
        p = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        M[c] = [v * inv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                fct = M[r][c]
                M[r] = [a - fct * b for a, b in zip(M[r], M[c])]
    return [row[n:] for row in M]


def det_field(A):
    n = len(A)
    if n == 0:
        return 1
    M = [list(r) for r in A]
    det = M[0][0].field.one
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            return M[0][0].field.zero
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det = det * M[c][c]
        for r in range(c + 1, n):
            if M[r][c] != 0:
                fct = M[r][c] / M[c][c]
                M[r] = [a - fct * b for a, b in zip(M[r], M[c])]
    return det


def normalize_sign(q):
    """Representative with positive leading numerator coefficient (a determinant up to row order)."""
    if q == 0:
        return q
    return -q if q.numer.LC < 0 else q


# ---------------------------------------------------------------------------
# parametrization
# ---------------------------------------------------------------------------

@dataclass
class DegreeRecord:
    t: int
    columns: list              # non-pinned columns (j, k) of H_t
    column_names: list         # slot label per column ("mu_4_3" style uses L_i of first new functional)
    row_labels: list           # ("comm", s, k, l) per row of H_t
    areg_rows: list            # indices into row_labels
    areg_cols: list            # indices into columns
    owner_cols: list           # indices into columns (nu'')
    rank: int
    det: object                # sign-normalized det A_reg,t (fraction field element)
    witnesses: dict            # row index -> coefficients over the A_reg rows
    new_params: list
    solved: dict               # name -> rational function
    kernel_dim: int
    h_t: int
    regular: bool = True


@dataclass
class Parametrization:
    basis: list
    nvars: int
    names: list                # every free slot name, in layout order
    field: object              # sympy FracField over all names
    params: list               # surviving free parameter names
    values: dict               # name -> rational function (parameters map to themselves)
    nu: list                   # per functional: {(j, k): rational function}
    records: list

    @property
    def gamma(self) -> int:
        return len(self.params)

    def q(self, i: int, alpha):
        """Dual coefficient ``q_{beta_i, alpha}(mu)``."""
        duals = build_duals(self.basis, self.nu, self.nvars, None, self.field.one)
        return duals[i].coefficient(tuple(alpha))

    def duals(self):
        return build_duals(self.basis, self.nu, self.nvars, None, self.field.one)

    def dependent(self) -> dict:
        return {k: v for k, v in self.values.items() if k not in self.params}


@dataclass
class RegularityCertificate:
    basis: list
    nvars: int
    regular: bool
    failing_degree: int | None
    parametrization: Parametrization | None
    records: list
    reason: str = ""

    def to_json(self) -> dict:
        return certificate_to_json(self)


def _fmt_q(c) -> str:
    c = Fraction(int(c.numerator), int(c.denominator))
    return str(c)


def poly_to_json(p) -> list:
    return [[list(m), _fmt_q(c)] for m, c in sorted(p.terms())]


def rational_to_json(q) -> dict:
    return {"num": poly_to_json(q.numer), "den": poly_to_json(q.denom)}


def rational_from_json(K, d):
    def build(terms):
        acc = K.ring.zero
        for mono, c in terms:
            term = K.ring.from_dict({tuple(mono): QQ(*_split_frac(c))})
            acc += term
        return acc
    return K(build(d["num"])) / K(build(d["den"]))


def _split_frac(s: str):
    f = Fraction(s)
    return f.numerator, f.denominator


def _slot_names(basis, n):
    names = []
    slot_of = {}
    for i in range(1, len(basis)):
        for s in layout_for(basis, i, n):
            if s.status == "free":
                names.append(s.name)
                slot_of[(i, s.column)] = s.name
    return names, slot_of


def parametrize(basis: Sequence, n: int) -> RegularityCertificate:
    """Run the parametrization for every degree of ``basis``; stops at the first failure."""
    basis = [tuple(b) for b in basis]
    if not basis or basis[0] != (0,) * n:
        raise ValueError("basis must start with the constant monomial")
    if not is_closed_under_division(basis):
        raise ValueError("basis is not closed under division")
    if any(degree(basis[i]) > degree(basis[i + 1]) for i in range(len(basis) - 1)):
        raise ValueError("basis must be sorted by degree")
    names, slot_of = _slot_names(basis, n)
    K, *gens = frac_field(",".join(names) if names else "_unused", QQ)
    sym = dict(zip(names, gens)) if names else {}
    values: dict = {}
    nu: list = [{}]
    records = []
    params: list = []
    order = max(degree(b) for b in basis)
    for t in range(1, order + 1):
        new = [i for i, b in enumerate(basis) if degree(b) == t]
        slots0 = layout_for(basis, new[0], n)
        cols = [s.column for s in slots0 if s.status != "pinned"]
        owner_idx = [p for p, c in enumerate(cols) if any(
            s.column == c and s.status == "owner" for s in slots0)]
        all_cols = columns_for_degree(basis, t, n)
        rows, labels = [], []
        prev = [b for b in basis if degree(b) < t]
        for s_idx, bs in enumerate(prev):
            if not any(degree(bs) < degree(b) < t for b in prev):
                continue
            for k in range(n):
                for l in range(k + 1, n):
                    full = commutation_row(basis, nu, t, s_idx, k, l, all_cols, K.zero)
                    row = [K(v) for v, c in zip(full, all_cols) if c in cols]
                    if all(v == 0 for v in row):
                        continue
                    rows.append(row)
                    labels.append(("comm", s_idx, k, l))
        allowed = [p for p in range(len(cols)) if p not in owner_idx]
        if rows:
            cleared = [clear_row_denominators(r)[0] for r in rows]
            elim = bareiss(cleared, allowed, len(cols))
        else:
            elim = EliminationResult(0, [], [], [], [], True)
        rank = elim.rank
        kernel_dim = len(cols) - rank
        rec = DegreeRecord(t=t, columns=cols, column_names=[], row_labels=labels,
                           areg_rows=list(elim.pivot_rows), areg_cols=list(elim.pivot_cols),
                           owner_cols=owner_idx, rank=rank, det=K.one, witnesses={},
                           new_params=[], solved={}, kernel_dim=kernel_dim, h_t=len(new))
        rec.column_names = [f"nu[{j + 1}]^{k + 1}" for (j, k) in cols]
        if not elim.residual_zero:
            rec.regular = False
            records.append(rec)
            return RegularityCertificate(basis, n, False, t, None, records,
                                         reason=f"H_{t} has rows outside the span of A_reg,{t} "
                                                "once the owner columns are fixed")
        A = [[rows[r][c] for c in elim.pivot_cols] for r in elim.pivot_rows]
        rec.det = normalize_sign(det_field(A)) if A else K.one
        # witness: each remaining row is y . (A_reg rows) on every column
        if elim.residual_rows:
            At = [list(col) for col in zip(*A)]
            rhs = [[rows[r][c] for r in elim.residual_rows] for c in elim.pivot_cols]
            Y = solve_field(At, rhs)    # Y[a][q]: weight of pivot row a for residual row q
            for q, r in enumerate(elim.residual_rows):
                y = [Y[a][q] for a in range(rank)]
                for c in range(len(cols)):
                    s = sum((y[a] * rows[elim.pivot_rows[a]][c] for a in range(rank)), K.zero)
                    if s != rows[r][c]:
                        raise AssertionError("row-membership witness failed to verify")
                rec.witnesses[r] = y
        # solve for every new functional
        for i in new:
            slots = {s.column: s for s in layout_for(basis, i, n)}
            vec = {}
            for p, c in enumerate(cols):
                s = slots[c]
                if s.status == "owner":
                    vec[p] = K(s.value)
                elif p not in elim.pivot_cols:
                    vec[p] = sym[s.name]
                    params.append(s.name)
                    rec.new_params.append(s.name)
                    values[s.name] = sym[s.name]
            if rank:
                rhs = [[-sum((rows[r][p] * vec[p] for p in vec), K.zero)] for r in elim.pivot_rows]
                sol = solve_field(A, rhs)
                for a, p in enumerate(elim.pivot_cols):
                    vec[p] = sol[a][0]
                    name = slots[cols[p]].name
                    values[name] = sol[a][0]
                    rec.solved[name] = sol[a][0]
            nu_i = {}
            for s in slots.values():
                if s.status == "pinned":
                    nu_i[s.column] = K.zero
            for p, c in enumerate(cols):
                nu_i[c] = vec[p]
            nu.append(nu_i)
        records.append(rec)
    par = Parametrization(basis, n, names, K, params, values, nu, records)
    return RegularityCertificate(basis, n, True, None, par, records)


def parametrize_step(basis: Sequence, n: int, t: int) -> DegreeRecord:
    """The degree-``t`` record of the parametrization of ``B_t`` (basis truncated at ``t``)."""
    sub = [tuple(b) for b in basis if degree(b) <= t]
    cert = parametrize(sub, n)
    if not cert.regular:
        raise ValueError(f"B_{t} is not regular")
    return cert.records[t - 1]


def certify_regular_basis(basis: Sequence, n: int | None = None) -> RegularityCertificate:
    basis = [tuple(b) for b in basis]
    n = n if n is not None else len(basis[0])
    return parametrize(basis, n)


# ---------------------------------------------------------------------------
# numeric helpers
# ---------------------------------------------------------------------------

def eval_poly_element(p, values: Sequence):
    acc = mpmath.mpf(0)
    for mono, c in p.terms():
        term = mpmath.mpf(int(c.numerator)) / int(c.denominator)
        for v, e in zip(values, mono):
            if e:
                term *= v ** e
        acc += term
    return acc


def eval_rational(q, values: Sequence):
    return eval_poly_element(q.numer, values) / eval_poly_element(q.denom, values)


def evaluate_areg(cert: RegularityCertificate, named_mu: dict) -> list:
    """Numeric ``A_reg,t(mu)`` for every degree, from the numeric free-slot values.

    Rows and columns follow the recorded pattern; the lower functionals use the
    numeric values directly (not the parametrization).
    """
    if not cert.regular:
        raise ValueError("certificate is not regular")
    par = cert.parametrization
    missing = [nm for nm in par.names if nm not in named_mu]
    if missing:
        raise KeyError(f"missing mu entries: {missing}")
    nu = numeric_nu(cert.basis, cert.nvars, named_mu)
    out = []
    for rec in cert.records:
        all_cols = columns_for_degree(cert.basis, rec.t, cert.nvars)
        mats = []
        for r in rec.areg_rows:
            _, s, k, l = rec.row_labels[r]
            full = commutation_row(cert.basis, nu, rec.t, s, k, l, all_cols, mpmath.mpf(0))
            by_col = dict(zip(all_cols, full))
            mats.append([by_col[rec.columns[c]] for c in rec.areg_cols])
        out.append(mats)
    return out


def numeric_nu(basis, n, named_mu: dict) -> list:
    """Coefficient table from named free-slot values (fixed slots filled in)."""
    nu = [{}]
    for i in range(1, len(basis)):
        d = {}
        for s in layout_for(basis, i, n):
            d[s.column] = named_mu[s.name] if s.status == "free" else s.value
        nu.append(d)
    return nu


def parametrization_residual(cert: RegularityCertificate, named_mu: dict):
    """max |q(params) - mu| over the dependent slots at numeric values."""
    par = cert.parametrization
    vals = [to_float(named_mu[nm]) if isinstance(named_mu[nm], Fraction) else named_mu[nm]
            for nm in par.names]
    worst = mpmath.mpf(0)
    for nm, q in par.values.items():
        worst = max(worst, abs(eval_rational(q, vals) - named_mu[nm]))
    return worst


def commutation_identities(cert: RegularityCertificate) -> list:
    """Every commutation equation with the parametrization substituted (all should be 0)."""
    par = cert.parametrization
    basis, n, nu = par.basis, par.nvars, par.nu
    out = []
    for i, bi in enumerate(basis):
        for s, bs in enumerate(basis):
            if not degree(bs) < degree(bi):
                continue
            for k in range(n):
                for l in range(k + 1, n):
                    acc = par.field.zero
                    for j, bj in enumerate(basis):
                        if degree(bs) < degree(bj) < degree(bi):
                            acc += nu[i].get((j, k), 0) * nu[j].get((s, l), 0) \
                                - nu[i].get((j, l), 0) * nu[j].get((s, k), 0)
                    out.append(((i, s, k, l), acc))
    return out


def g0_equations(cert: RegularityCertificate) -> list:
    """``(i, s, k, l)`` labels of the commutation equations on ``A_reg`` rows."""
    out = []
    for rec in cert.records:
        new = [i for i, b in enumerate(cert.basis) if degree(b) == rec.t]
        for i in new:
            for r in rec.areg_rows:
                _, s, k, l = rec.row_labels[r]
                out.append((i, s, k, l))
    return out


def certificate_to_json(cert: RegularityCertificate) -> dict:
    par = cert.parametrization
    doc = {
        "basis": [list(b) for b in cert.basis],
        "nvars": cert.nvars,
        "verdict": "regular" if cert.regular else "not-regular",
        "failing_degree": cert.failing_degree,
        "reason": cert.reason,
        "variables": par.names if par else [],
        "parameters": par.params if par else [],
        "degrees": [],
    }
    for rec in cert.records:
        doc["degrees"].append({
            "t": rec.t,
            "columns": [list(c) for c in rec.columns],
            "rows": [list(lbl[1:]) for lbl in rec.row_labels],
            "areg_rows": rec.areg_rows,
            "areg_cols": rec.areg_cols,
            "owner_cols": rec.owner_cols,
            "rank": rec.rank,
            "kernel_dim": rec.kernel_dim,
            "det": rational_to_json(rec.det) if hasattr(rec.det, "numer") else None,
            "witnesses": {str(r): [rational_to_json(y) for y in ys] for r, ys in rec.witnesses.items()},
            "new_parameters": rec.new_params,
            "solved": {k: rational_to_json(v) for k, v in rec.solved.items()},
            "regular": rec.regular,
        })
    return doc


def dumps_certificate(cert: RegularityCertificate) -> str:
    return json.dumps(certificate_to_json(cert), indent=2)
