"""Deflated system in the unknowns ``(x, mu)`` and its square/overflow split.

The system stacks

* the commutation polynomials of every functional ``L_i`` (quadratic in mu),
* ``L_i(f_j)`` expanded as polynomials in ``(x, mu)``,

with the duality constraints already built into the coefficient layout
(fixed slots are constants, so they never become unknowns).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from . import linalg
from .dualspace import build_duals, layout_for
from .polycore import Polynomial, degree, is_closed_under_division, to_float


class DeflationError(RuntimeError):
    pass


@dataclass
class DeflatedSystem:
    f: list                       # input polynomials (n variables)
    basis: list
    n: int
    mu_names: list                # free slots, in layout order
    equations: list               # Polynomial in n + len(mu_names) variables
    labels: list                  # ("a", i, s, k, l) or ("c", i, j)
    nu: list                      # symbolic coefficient table (Polynomial entries)
    duals: list                   # symbolic functionals (Polynomial coefficients)
    _float_eqs: list = field(default_factory=list, repr=False)
    _jac: list = field(default_factory=list, repr=False)

    @property
    def nunknowns(self) -> int:
        return self.n + len(self.mu_names)

    @property
    def variable_names(self) -> list:
        return [f"x{i + 1}" for i in range(self.n)] + list(self.mu_names)

    @property
    def shape(self) -> tuple:
        return len(self.equations), self.nunknowns

    def a_indices(self) -> list:
        return [p for p, lb in enumerate(self.labels) if lb[0] == "a"]

    def c_indices(self) -> list:
        return [p for p, lb in enumerate(self.labels) if lb[0] == "c"]

    def index_of(self, label) -> int:
        return self.labels.index(tuple(label))

    def float_equations(self):
        if not self._float_eqs:
            self._float_eqs = [e.to_float() for e in self.equations]
        return self._float_eqs

    def jacobian_polys(self):
        if not self._jac:
            self._jac = [[e.diff(v) for v in range(self.nunknowns)] for e in self.float_equations()]
        return self._jac

    def evaluate(self, point, rows: Sequence[int] | None = None) -> list:
        rows = range(len(self.equations)) if rows is None else rows
        eqs = self.float_equations()
        return [eqs[r].evaluate(point) if eqs[r] else mpmath.mpf(0) for r in rows]

    def jacobian(self, point, rows: Sequence[int] | None = None) -> list:
        rows = range(len(self.equations)) if rows is None else rows
        J = self.jacobian_polys()
        return [[J[r][v].evaluate(point) if J[r][v] else mpmath.mpf(0)
                 for v in range(self.nunknowns)] for r in rows]

    def label_text(self, p: int) -> str:
        lb = self.labels[p]
        if lb[0] == "c":
            return f"L{lb[1] + 1}(f{lb[2] + 1})"
        return f"comm(L{lb[1] + 1}; s={lb[2] + 1}, k={lb[3] + 1}, l={lb[4] + 1})"


def symbolic_nu(basis, n: int, names: Sequence[str], N: int) -> list:
    """Coefficient table whose free slots are the ring variables ``n + index``."""
    pos = {nm: n + p for p, nm in enumerate(names)}
    nu = [{}]
    for i in range(1, len(basis)):
        d = {}
        for s in layout_for(basis, i, n):
            if s.status == "free":
                d[s.column] = Polynomial.variable(pos[s.name], N)
            elif s.value:
                d[s.column] = Polynomial.constant(s.value, N)
        nu.append(d)
    return nu


def build_deflated_system(f: Sequence[Polynomial], basis: Sequence, n: int | None = None) -> DeflatedSystem:
    basis = [tuple(b) for b in basis]
    n = n if n is not None else len(basis[0])
    if not is_closed_under_division(basis):
        raise DeflationError("basis is not closed under division")
    if any(p.nvars != n for p in f):
        raise DeflationError("polynomials and basis disagree on the number of variables")
    names = [s.name for i in range(1, len(basis)) for s in layout_for(basis, i, n) if s.status == "free"]
    N = n + len(names)
    nu = symbolic_nu(basis, n, names, N)
    duals = build_duals(basis, nu, n, None, Polynomial.constant(1, N))
    eqs, labels = [], []
    for i, bi in enumerate(basis):
        for s, bs in enumerate(basis):
            if not degree(bs) < degree(bi):
                continue
            for k in range(n):
                for l in range(k + 1, n):
                    acc = Polynomial.zero(N)
                    for j, bj in enumerate(basis):
                        if degree(bs) < degree(bj) < degree(bi):
                            a = nu[i].get((j, k))
                            b = nu[j].get((s, l))
                            c = nu[i].get((j, l))
                            d = nu[j].get((s, k))
                            if a is not None and b is not None:
                                acc = acc + a * b
                            if c is not None and d is not None:
                                acc = acc - c * d
                    if acc:
                        eqs.append(acc)
                        labels.append(("a", i, s, k, l))
    fe = [p.embed(N, list(range(n))) for p in f]
    for i, L in enumerate(duals):
        for j, p in enumerate(fe):
            eqs.append(L.apply_symbolic(p))
            labels.append(("c", i, j))
    return DeflatedSystem(list(f), basis, n, names, eqs, labels, nu, duals)


@dataclass
class SquareSplit:
    f0_rows: list                 # indices into sys.equations, in selection order
    f1_rows: list                 # leftover L_i(f_j) rows
    implied_rows: list            # commutation rows outside G0 (consequences on the regular stratum)
    g0_rows: list
    omega: list                   # (i, j) labels of F1 rows
    sigma_min_j0: object
    rule: str

    def removed_labels(self, sys: DeflatedSystem) -> list:
        return [sys.labels[p] for p in self.f1_rows]


def _g0_rows(sys: DeflatedSystem, g0_labels) -> list:
    if g0_labels is None:
        return sys.a_indices()
    out = []
    for (i, s, k, l) in g0_labels:
        lb = ("a", i, s, k, l)
        if lb in sys.labels:
            out.append(sys.labels.index(lb))
    return out


def _residual(v, basis_vecs):
    for _ in range(2):              # re-orthogonalize once
        for q in basis_vecs:
            v = v - np.vdot(q, v) * q
    return v


def _select_rows(J, g0, c_rows, N, tau, rule):
    """Gram-Schmidt row selection on the Jacobian (QR of ``J^T``).

    ``threshold``: scan the ``L_i(f_j)`` rows in order and keep a row when its
    component orthogonal to the rows kept so far exceeds ``tau``.
    ``pivoted``: repeatedly keep the row with the largest such component.
    Either way the ``G0`` rows come first and a shortfall is filled by the
    pivoted rule.
    """
    A = np.array([[complex(v) for v in row] for row in J])
    tau = float(tau)
    chosen, basis_vecs = [], []
    for p in g0:
        v = _residual(A[p].copy(), basis_vecs)
        nv = np.linalg.norm(v)
        if nv <= tau:
            raise DeflationError("commutation rows of G0 are dependent at the point")
        chosen.append(p)
        basis_vecs.append(v / nv)
    pool = list(c_rows)
    if rule == "threshold":
        for p in list(pool):
            if len(chosen) == N:
                break
            v = _residual(A[p].copy(), basis_vecs)
            nv = np.linalg.norm(v)
            if nv > tau:
                chosen.append(p)
                pool.remove(p)
                basis_vecs.append(v / nv)
    elif rule != "pivoted":
        raise ValueError(f"unknown row selection rule {rule!r}")
    while len(chosen) < N:
        best, best_norm, best_vec = None, -1.0, None
        for p in pool:
            v = _residual(A[p].copy(), basis_vecs)
            nv = np.linalg.norm(v)
            if nv > best_norm * (1 + 1e-12):
                best, best_norm, best_vec = p, nv, v
        if best is None or best_norm <= tau:
            raise DeflationError(f"Jacobian rank {len(chosen)} < {N} unknowns at the point")
        chosen.append(best)
        pool.remove(best)
        basis_vecs.append(best_vec / best_norm)
    return chosen


def extract_square(sys: DeflatedSystem, point, tau=mpmath.mpf("0.01"), g0_labels=None,
                   remove: Sequence | None = None, rule: str = "threshold") -> SquareSplit:
    """Choose ``F0``: all ``G0`` rows plus ``L_i(f_j)`` rows selected on ``J^T``.

    ``remove`` optionally names the ``(i, j)`` pairs (0-based) to leave out,
    which replaces the automatic selection (see :func:`_select_rows`).
    """
    N = sys.nunknowns
    g0 = _g0_rows(sys, g0_labels)
    implied = [p for p in sys.a_indices() if p not in g0]
    c_rows = sys.c_indices()
    J = sys.jacobian(point)
    if remove is not None:
        drop = {sys.index_of(("c", i, j)) for (i, j) in remove}
        chosen = g0 + [p for p in c_rows if p not in drop]
        rule = "explicit"
        if len(chosen) != N:
            raise DeflationError(f"removal set leaves {len(chosen)} equations for {N} unknowns")
    else:
        chosen = _select_rows(J, g0, c_rows, N, tau, rule)
    f1 = [p for p in c_rows if p not in chosen]
    J0 = [J[p] for p in chosen]
    smin = linalg.sigma_min(J0)
    if not smin > tau:
        raise DeflationError(f"sigma_min(J0) = {mpmath.nstr(smin, 6)} does not exceed {tau}")
    omega = [(sys.labels[p][1], sys.labels[p][2]) for p in f1]
    return SquareSplit(chosen, f1, implied, g0, omega, smin, rule)


@dataclass
class PerturbationMap:
    omega: list                    # (i, j): functional i, polynomial j
    values: dict                   # (i, j) -> eps_{j,i} = L_i(f_j)(point)
    point: tuple                   # xi*
    perturbed: list                # f_eps as float polynomials

    def matrix(self, nf: int, r: int) -> list:
        E = [[mpmath.mpf(0)] * r for _ in range(nf)]
        for (i, j), v in self.values.items():
            E[j][i] = v
        return E

    def max_norm(self):
        return max((abs(v) for v in self.values.values()), default=mpmath.mpf(0))

    def frobenius(self):
        return mpmath.sqrt(sum((abs(v) ** 2 for v in self.values.values()), mpmath.mpf(0)))


def perturbed_residual(sys: DeflatedSystem, split: SquareSplit, point) -> PerturbationMap:
    """``eps`` on ``Omega`` and the polynomials ``f_j - sum_i eps_{j,i} (x - xi*)^{beta_i}``."""
    n = sys.n
    xi = tuple(point[:n])
    vals = {}
    for p in split.f1_rows:
        _, i, j = sys.labels[p]
        vals[(i, j)] = sys.float_equations()[p].evaluate(point) if sys.equations[p] else mpmath.mpf(0)
    polys = []
    for j, fj in enumerate(sys.f):
        g = fj.to_float() if fj.kind == "exact" else fj
        for (i, jj), e in vals.items():
            if jj != j:
                continue
            mono = Polynomial.constant(mpmath.mpf(1), n)
            for k, b in enumerate(sys.basis[i]):
                if b:
                    mono = mono * (Polynomial.variable(k, n, "float") - xi[k]) ** b
            g = g - mono * e
        polys.append(g)
    return PerturbationMap(list(split.omega), vals, xi, polys)


def initial_point(struct, sys: DeflatedSystem) -> list:
    """``(xi_0, mu_0)`` from a numeric multiplicity structure with the same basis."""
    if [tuple(b) for b in struct.basis] != sys.basis:
        raise DeflationError("structure and deflated system use different bases")
    named = struct.mu.named(struct.basis, struct.nvars)
    xs = [to_float(v) if not isinstance(v, (mpmath.mpf, mpmath.mpc)) else v for v in struct.point]
    ms = [named[nm] for nm in sys.mu_names]
    ms = [to_float(v) if not isinstance(v, (mpmath.mpf, mpmath.mpc)) else v for v in ms]
    return xs + ms
