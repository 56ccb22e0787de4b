"""Dense linear algebra on small matrices in either scalar kind.

Float matrices are lists of rows of mpmath numbers and are factored with
mpmath at the ambient precision; exact matrices are lists of rows of
``Fraction`` and are reduced by plain Gauss-Jordan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath


@dataclass
class KernelResult:
    rank: int
    kernel_basis: list = field(default_factory=list)
    singular_values: list = field(default_factory=list)

    @property
    def sigma_min(self):
        """Smallest singular value (0 if the matrix has more columns than rows)."""
        if not self.singular_values:
            return mpmath.inf
        return self.singular_values[-1]


def shape(M) -> tuple[int, int]:
    return len(M), (len(M[0]) if M else 0)


def _is_complex(M) -> bool:
    return any(isinstance(v, mpmath.mpc) and v.imag != 0 for row in M for v in row)


def to_mp(M) -> mpmath.matrix:
    m, n = shape(M)
    A = mpmath.matrix(m, n)
    for i, row in enumerate(M):
        for j, v in enumerate(row):
            A[i, j] = v
    return A


def svd(M, compute_uv: bool = True):
    """Full SVD ``M = U diag(S) V`` via mpmath; S descending."""
    A = to_mp(M)
    fn = mpmath.svd_c if _is_complex(M) else mpmath.svd_r
    if compute_uv:
        U, S, V = fn(A, full_matrices=True, compute_uv=True)
        return U, [S[i] for i in range(S.rows)], V
    S = fn(A, compute_uv=False)
    return [S[i] for i in range(S.rows)]


def singular_values(M) -> list:
    m, n = shape(M)
    if m == 0 or n == 0:
        return []
    return sorted(svd(M, compute_uv=False), reverse=True)


def numeric_kernel(M, eps) -> KernelResult:
    """Numerical rank and kernel with an absolute singular-value threshold."""
    m, n = shape(M)
    if m == 0 or n == 0:
        raise ValueError("numeric_kernel needs a non-empty matrix")
    if not eps > 0:
        raise ValueError("tolerance must be positive")
    U, S, V = svd(M)
    order = sorted(range(len(S)), key=lambda i: -S[i])
    S = [S[i] for i in order]
    rank = sum(1 for s in S if s > eps)
    # rows of V are right singular vectors; permute the leading ones to match S
    rows = [order[i] for i in range(len(S))] + list(range(len(S), n))
    basis = []
    for i in rows[rank:]:
        basis.append([mpmath.conj(V[i, j]) for j in range(n)])
    return KernelResult(rank=rank, kernel_basis=basis, singular_values=S)


def sigma_min(M):
    """Smallest singular value of a (possibly rectangular) matrix, min(m, n)-th."""
    m, n = shape(M)
    if m == 0 or n == 0:
        return mpmath.inf
    S = singular_values(M)
    if n > m:
        return mpmath.mpf(0)
    return S[-1]


def sigma_min_lower(M):
    """Lower bound on the smallest singular value of ``M``.

    Subtracts a backward-error majorant ``c * max(m, n) * u * sigma_max``
    of a Householder-based SVD at unit roundoff ``u``.
    """
    m, n = shape(M)
    if m == 0 or n == 0:
        return mpmath.inf
    S = singular_values(M)
    if n > m:
        return mpmath.mpf(0)
    u = mpmath.ldexp(1, -mpmath.mp.prec)
    slack = 10 * max(m, n) * u * S[0]
    return max(S[-1] - slack, mpmath.mpf(0))


def solve(M, b) -> list:
    """Solve a square system with mpmath LU."""
    x = mpmath.lu_solve(to_mp(M), mpmath.matrix(list(b)))
    return [x[i] for i in range(x.rows)]


def inverse(M):
    A = to_mp(M) ** -1
    return [[A[i, j] for j in range(A.cols)] for i in range(A.rows)]


def matvec(M, v) -> list:
    return [sum((a * b for a, b in zip(row, v)), 0) for row in M]


def matmul(A, B):
    Bt = list(zip(*B)) if B else []
    return [[sum((a * b for a, b in zip(row, col)), 0) for col in Bt] for row in A]


def transpose(A):
    return [list(r) for r in zip(*A)]


def norm2(v):
    return mpmath.sqrt(sum((abs(x) ** 2 for x in v), mpmath.mpf(0)))


def norm_inf(v):
    return max((abs(x) for x in v), default=mpmath.mpf(0))


def spectral_norm(M):
    S = singular_values(M)
    return S[0] if S else mpmath.mpf(0)


# ---------------------------------------------------------------------------
# exact arithmetic
# ---------------------------------------------------------------------------

def rref(M, pivot_order=None):
    """Reduced row echelon form over the rationals.

    ``pivot_order`` optionally lists the column indices in the order in which
    they should be tried as pivots (default: left to right).  Returns the
    reduced rows and the list of pivot columns (in the order found).
    """
    R = [[Fraction(v) for v in row] for row in M]
    m, n = shape(R)
    cols = list(pivot_order) if pivot_order is not None else list(range(n))
    pivots = []
    r = 0
    for c in cols:
        if r == m:
            break
        p = next((i for i in range(r, m) if R[i][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][c]
        R[r] = [v * inv for v in R[r]]
        for i in range(m):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
    return R[:r], pivots


def rank_exact(M) -> int:
    if not M:
        return 0
    return len(rref(M)[1])


def nullspace_exact(M, ncols: int | None = None, pivot_order=None) -> list:
    """Basis of the right kernel, one vector per free column."""
    n = ncols if ncols is not None else shape(M)[1]
    if not M:
        return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    R, pivots = rref(M, pivot_order)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, p in zip(R, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis
