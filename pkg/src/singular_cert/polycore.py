"""Sparse multivariate polynomials and differential functionals.

Exponent vectors are plain tuples of non-negative ints.  Dual elements are
stored in the normalized basis ``d^a / a!``, so that derivation and
integration along an axis are exponent shifts and ``L((x - xi)^b)`` is a
direct coefficient read.

Scalars come in two kinds which are never mixed implicitly:

* ``"exact"``: ``int`` / ``fractions.Fraction``
* ``"float"``: ``mpmath.mpf`` / ``mpmath.mpc`` at the ambient mpmath precision

Use :func:`to_exact` / :func:`to_float` (or :meth:`Polynomial.to_float`) to
convert between them.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import comb, factorial
from typing import Any, Iterable, Mapping, Sequence

import mpmath

Monomial = tuple  # tuple[int, ...]

EXACT = "exact"
FLOAT = "float"


# ---------------------------------------------------------------------------
# monomials
# ---------------------------------------------------------------------------

def degree(alpha: Monomial) -> int:
    return sum(alpha)


def unit(k: int, n: int) -> Monomial:
    return tuple(1 if i == k else 0 for i in range(n))


def add_exp(alpha: Monomial, beta: Monomial) -> Monomial:
    return tuple(a + b for a, b in zip(alpha, beta))


def shift_exp(alpha: Monomial, k: int, by: int = 1) -> Monomial:
    return alpha[:k] + (alpha[k] + by,) + alpha[k + 1:]


def grlex_key(alpha: Monomial):
    """Sort key for the graded order used everywhere in the package.

    Lower total degree first; inside a degree ``x1`` dominates ``x2`` and so
    on, so ``x1^2 < x1*x2 < x1*x3 < x2^2 < ...`` in ascending sort.
    """
    return (sum(alpha), tuple(-a for a in alpha))


def exp_factorial(alpha: Monomial) -> int:
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def monomials_of_degree(n: int, d: int) -> list[Monomial]:
    """All exponent vectors of total degree ``d`` in ``n`` variables, grlex order."""
    if n == 0:
        return [()] if d == 0 else []
    out = []
    for first in range(d, -1, -1):
        for rest in monomials_of_degree(n - 1, d - first):
            out.append((first,) + rest)
    return out


def monomials_up_to(n: int, d: int) -> list[Monomial]:
    return [m for t in range(d + 1) for m in monomials_of_degree(n, t)]


def last_nonzero(alpha: Monomial) -> int:
    for k in range(len(alpha) - 1, -1, -1):
        if alpha[k]:
            return k
    raise ValueError("zero exponent has no last nonzero index")


def is_closed_under_division(exponents: Iterable[Monomial]) -> bool:
    """True iff every ``beta - e_k`` (with ``beta_k > 0``) is again in the set."""
    E = set(map(tuple, exponents))
    for beta in E:
        for k, b in enumerate(beta):
            if b > 0 and shift_exp(beta, k, -1) not in E:
                return False
    return True


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------

def scalar_kind(c) -> str:
    if isinstance(c, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(c, (int, Fraction)):
        return EXACT
    if isinstance(c, (mpmath.mpf, mpmath.mpc)):
        return FLOAT
    raise TypeError(f"unsupported scalar type {type(c).__name__}; "
                    "convert with to_exact() or to_float()")


def to_exact(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float literal.

    Floats are read through their shortest repr, so ``0.003`` becomes
    ``3/1000`` rather than the binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {x!r} to an exact rational")


def to_float(x):
    """mpmath number at the ambient precision."""
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return +x
    if isinstance(x, complex):
        return mpmath.mpc(x)
    if isinstance(x, str):
        s = x.strip().replace("i", "j") if "j" not in x else x.strip()
        return mpmath.mpmathify(s)
    return mpmath.mpmathify(x)


def _check_kinds(a, b):
    if a is not None and b is not None and a != b:
        raise TypeError("mixed exact/float arithmetic; convert explicitly")
    return a if a is not None else b


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

class Polynomial:
    """Sparse polynomial ``{exponent tuple: coefficient}`` in ``nvars`` variables.

    Instances are treated as immutable.  Zero coefficients are never stored.
    The zero polynomial carries no scalar kind and combines with either.
    """

    __slots__ = ("nvars", "terms", "kind")

    def __init__(self, terms: Mapping[Monomial, Any] | None = None, nvars: int = 0):
        self.nvars = nvars
        clean = {}
        kind = None
        for alpha, c in (terms or {}).items():
            alpha = tuple(alpha)
            if len(alpha) != nvars:
                raise ValueError(f"exponent {alpha} does not have {nvars} entries")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            kind = _check_kinds(kind, scalar_kind(c))
            if c != 0:
                clean[alpha] = c
        self.terms = clean
        self.kind = kind if clean else None

    # constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, c, nvars: int) -> "Polynomial":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int, kind: str = EXACT) -> "Polynomial":
        one = 1 if kind == EXACT else mpmath.mpf(1)
        return cls({unit(i, nvars): one}, nvars)

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls({}, nvars)

    @classmethod
    def _raw(cls, terms: dict, nvars: int, kind) -> "Polynomial":
        p = cls.__new__(cls)
        p.nvars = nvars
        p.terms = terms
        p.kind = kind if terms else None
        return p

    # basic queries ----------------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self.terms == other.terms
        if other == 0:
            return not self.terms
        try:
            scalar_kind(other)
        except TypeError:
            return NotImplemented
        return self.terms == ({(0,) * self.nvars: other} if other != 0 else {})

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=-1)

    def coefficient(self, alpha: Monomial):
        return self.terms.get(tuple(alpha), 0)

    def is_constant(self) -> bool:
        return all(not any(a) for a in self.terms)

    def constant_term(self):
        return self.terms.get((0,) * self.nvars, 0)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]), reverse=True)

    def variables_used(self) -> set[int]:
        return {i for alpha in self.terms for i, a in enumerate(alpha) if a}

    # arithmetic --------------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different numbers of variables")
            return other
        return Polynomial.constant(other, self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        kind = _check_kinds(self.kind, other.kind)
        out = dict(self.terms)
        for alpha, c in other.terms.items():
            s = out.get(alpha, 0) + c
            if s == 0:
                out.pop(alpha, None)
            else:
                out[alpha] = s
        return Polynomial._raw(out, self.nvars, kind)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({a: -c for a, c in self.terms.items()}, self.nvars, self.kind)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if other == 0:
                return Polynomial.zero(self.nvars)
            kind = _check_kinds(self.kind, scalar_kind(other))
            return Polynomial._raw({a: c * other for a, c in self.terms.items()}, self.nvars, kind)
        other = self._coerce(other)
        kind = _check_kinds(self.kind, other.kind)
        out: dict = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                a = tuple(x + y for x, y in zip(a1, a2))
                out[a] = out.get(a, 0) + c1 * c2
        return Polynomial._raw({a: c for a, c in out.items() if c != 0}, self.nvars, kind)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Polynomial):
            raise TypeError("polynomial division is not supported")
        if scalar_kind(scalar) == EXACT:
            scalar = Fraction(scalar)
        return self * (1 / scalar)

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(1, self.nvars) if self.kind != FLOAT else \
            Polynomial.constant(mpmath.mpf(1), self.nvars)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # calculus ------------------------------------------------------------------
    def diff(self, i: int, times: int = 1) -> "Polynomial":
        out = {}
        for alpha, c in self.terms.items():
            a = alpha[i]
            if a < times:
                continue
            f = 1
            for m in range(a - times + 1, a + 1):
                f *= m
            out[shift_exp(alpha, i, -times)] = c * f
        return Polynomial._raw(out, self.nvars, self.kind)

    def taylor_coefficient_poly(self, alpha: Monomial) -> "Polynomial":
        """``d^alpha p / alpha!`` as a polynomial (derivatives in the first len(alpha) vars)."""
        out = {}
        for beta, c in self.terms.items():
            if any(b < a for a, b in zip(alpha, beta)):
                continue
            f = 1
            for a, b in zip(alpha, beta):
                f *= comb(b, a)
            gamma = tuple(b - a for a, b in zip(alpha, beta)) + beta[len(alpha):]
            out[gamma] = c * f
        return Polynomial._raw(out, self.nvars, self.kind)

    def shift(self, point: Sequence) -> "Polynomial":
        """Taylor expansion: the polynomial ``h -> p(point + h)``."""
        if len(point) != self.nvars:
            raise ValueError("point dimension does not match")
        kind = self.kind
        for v in point:
            kind = _check_kinds(kind, scalar_kind(v))
        out: dict = {}
        for alpha, c in self.terms.items():
            factors = []
            for i, a in enumerate(alpha):
                xi = point[i]
                factors.append([(b, comb(a, b) * xi ** (a - b)) for b in range(a + 1)])
            for combo in product(*factors):
                coef = c
                for _, w in combo:
                    coef = coef * w
                if coef == 0:
                    continue
                key = tuple(b for b, _ in combo)
                out[key] = out.get(key, 0) + coef
        return Polynomial._raw({a: v for a, v in out.items() if v != 0}, self.nvars, kind)

    def evaluate(self, point: Sequence):
        if len(point) != self.nvars:
            raise ValueError(f"expected a point with {self.nvars} coordinates")
        kind = self.kind
        for v in point:
            kind = _check_kinds(kind, scalar_kind(v))
        total = 0 if kind != FLOAT else mpmath.mpf(0)
        powers: dict = {}
        for alpha, c in self.terms.items():
            term = c
            for i, a in enumerate(alpha):
                if a:
                    key = (i, a)
                    if key not in powers:
                        powers[key] = point[i] ** a
                    term = term * powers[key]
            total = total + term
        return total

    __call__ = evaluate

    # conversions ---------------------------------------------------------------
    def to_float(self) -> "Polynomial":
        return Polynomial._raw({a: to_float(c) for a, c in self.terms.items()},
                               self.nvars, FLOAT if self.terms else None)

    def embed(self, nvars: int, positions: Sequence[int]) -> "Polynomial":
        """Re-index variable ``i`` as variable ``positions[i]`` of a larger ring."""
        out = {}
        for alpha, c in self.terms.items():
            beta = [0] * nvars
            for i, a in enumerate(alpha):
                beta[positions[i]] += a
            out[tuple(beta)] = c
        return Polynomial._raw(out, nvars, self.kind)

    # printing -----------------------------------------------------------------
    def format(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = [f"x{i + 1}" for i in range(self.nvars)]
        if not self.terms:
            return "0"
        pieces = []
        for alpha, c in self.sorted_terms():
            mono = "*".join(n if a == 1 else f"{n}^{a}" for n, a in zip(names, alpha) if a)
            neg, mag = _split_sign(c)
            if mono:
                cs = "" if mag == 1 else _format_scalar(mag) + "*"
                body = cs + mono
            else:
                body = _format_scalar(mag)
            pieces.append(("-" if neg else "+", body))
        first_sign, first = pieces[0]
        s = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            s += f" {sign} {body}"
        return s

    def __repr__(self):
        return f"Polynomial({self.format()!r}, nvars={self.nvars})"

    __str__ = format


def _split_sign(c):
    if isinstance(c, mpmath.mpc):
        return False, c
    if c < 0:
        return True, -c
    return False, c


def _format_scalar(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    if isinstance(c, int):
        return str(c)
    if isinstance(c, mpmath.mpc):
        return "(" + mpmath.nstr(c, mpmath.mp.dps).replace("j", "*I") + ")"
    return mpmath.nstr(c, mpmath.mp.dps)


# ---------------------------------------------------------------------------
# dual elements
# ---------------------------------------------------------------------------

def _is_zero(c) -> bool:
    return c == 0


class DualElement:
    """``L = sum_a c_a d^a / a!`` anchored at ``anchor`` (``None`` = symbolic).

    Coefficients may be exact or float scalars, or :class:`Polynomial`
    objects for parametric functionals.
    """

    __slots__ = ("nvars", "coeffs", "anchor")

    def __init__(self, coeffs: Mapping[Monomial, Any], nvars: int, anchor: Sequence | None = None):
        self.nvars = nvars
        self.coeffs = {tuple(a): c for a, c in coeffs.items() if not _is_zero(c)}
        for a in self.coeffs:
            if len(a) != nvars or any(x < 0 for x in a):
                raise ValueError(f"bad exponent {a} for a functional in {nvars} variables")
        if anchor is not None:
            anchor = tuple(anchor)
            if len(anchor) != nvars:
                raise ValueError("anchor dimension does not match")
        self.anchor = anchor

    @classmethod
    def evaluation(cls, nvars: int, anchor=None, one=1) -> "DualElement":
        """The order-0 functional ``1_xi``."""
        return cls({(0,) * nvars: one}, nvars, anchor)

    def order(self) -> int:
        return max((sum(a) for a in self.coeffs), default=-1)

    def coefficient(self, alpha: Monomial):
        return self.coeffs.get(tuple(alpha), 0)

    def with_anchor(self, anchor) -> "DualElement":
        return DualElement(self.coeffs, self.nvars, anchor)

    def __add__(self, other: "DualElement") -> "DualElement":
        if other.nvars != self.nvars:
            raise ValueError("dimension mismatch")
        out = dict(self.coeffs)
        for a, c in other.coeffs.items():
            out[a] = out[a] + c if a in out else c
        return DualElement(out, self.nvars, self.anchor or other.anchor)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, s) -> "DualElement":
        return DualElement({a: c * s for a, c in self.coeffs.items()}, self.nvars, self.anchor)

    def derive(self, k: int) -> "DualElement":
        return derive(self, k)

    def integrate(self, k: int) -> "DualElement":
        return truncated_integral(self, k)

    def __call__(self, p: Polynomial):
        return eval_dual(self, p)

    def apply_symbolic(self, p: Polynomial) -> Polynomial:
        """``L(p)`` with the anchor left free: ``sum_a c_a (d^a p / a!)(x)``.

        Derivatives act on the first ``self.nvars`` variables of ``p``;
        coefficients may be polynomials in the same ring as ``p``.
        """
        out = Polynomial.zero(p.nvars)
        for alpha, c in self.coeffs.items():
            t = p.taylor_coefficient_poly(alpha)
            if t:
                out = out + t * c
        return out

    def __repr__(self):
        parts = [f"{c}*d^{a}/{a}!" for a, c in sorted(self.coeffs.items(), key=lambda t: grlex_key(t[0]))]
        return "DualElement(" + (" + ".join(parts) or "0") + ")"


def derive(L: DualElement, k: int) -> DualElement:
    """``d/dd_k`` of ``L``: in the normalized basis this shifts exponents down."""
    if not 0 <= k < L.nvars:
        raise IndexError(f"axis {k} out of range for {L.nvars} variables")
    out = {}
    for a, c in L.coeffs.items():
        if a[k] > 0:
            out[shift_exp(a, k, -1)] = c
    return DualElement(out, L.nvars, L.anchor)


def truncated_integral(L: DualElement, k: int) -> DualElement:
    """Integrate along axis ``k`` after setting ``d_{k+1} = ... = d_n = 0``."""
    if not 0 <= k < L.nvars:
        raise IndexError(f"axis {k} out of range for {L.nvars} variables")
    out = {}
    for a, c in L.coeffs.items():
        if any(a[k + 1:]):
            continue
        out[shift_exp(a, k, 1)] = c
    return DualElement(out, L.nvars, L.anchor)


def truncate(L: DualElement, k: int) -> DualElement:
    """``L(d_1, .., d_{k+1}, 0, .., 0)`` (0-based axis ``k`` is the last one kept)."""
    return DualElement({a: c for a, c in L.coeffs.items() if not any(a[k + 1:])}, L.nvars, L.anchor)


def eval_dual(L: DualElement, p: Polynomial):
    """``sum_a c_a * (d^a p)(xi) / a!``."""
    if p.nvars != L.nvars:
        raise ValueError(f"functional in {L.nvars} variables applied to a polynomial in {p.nvars}")
    if L.anchor is None:
        raise ValueError("functional has a symbolic anchor; use apply_symbolic()")
    return eval_dual_taylor(L, p.shift(L.anchor))


def eval_dual_taylor(L: DualElement, taylor: Polynomial):
    """Pairing against a precomputed Taylor expansion ``h -> p(xi + h)``."""
    total = 0
    for a, c in L.coeffs.items():
        t = taylor.terms.get(a)
        if t is not None:
            total = total + c * t
    return total
