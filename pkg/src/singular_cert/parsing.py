"""Reader for polynomial-system files.

Grammar of one expression::

    poly     := ['+'|'-'] term (('+'|'-') term)*
    term     := factor ('*'? factor)*
    factor   := number | 'I' | var ['^' int] | '(' poly ')' ['^' int]

Numbers are decimal or rational literals and are kept exact (``0.003`` is
``3/1000``).  ``I`` is the imaginary unit; using it switches the system to
float coefficients.

A system file holds one polynomial per line plus optional header lines::

    # comment
    vars: x y z
    point: 0.002, 1.003, 0.004
    tol: 0.01
    x^3 + y^2 + z^2 - 1

Without a ``vars:`` line, variables must be named ``x1 .. xn``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .polycore import Polynomial, to_exact, to_float


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, column {col}: {msg}" if line else msg)
        self.line, self.col = line, col


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")

_XN = re.compile(r"x(\d+)$")


def _tokenize(s: str, line: int):
    pos, out = 0, []
    s = s.rstrip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m or m.end() == pos:
            while s[pos].isspace():
                pos += 1
            raise ParseError(f"unexpected character {s[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    out.append(("end", "", len(s) + 1))
    return out


class _Parser:
    def __init__(self, text: str, names: Sequence[str] | None, line: int):
        self.toks = _tokenize(text, line)
        self.i = 0
        self.line = line
        self.names = list(names) if names is not None else None
        self.nvars = len(names) if names is not None else None
        self.seen: set[str] = set()
        self.uses_i = False

    def peek(self):
        return self.toks[min(self.i, len(self.toks) - 1)]

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok[2])

    def parse(self):
        terms = self.poly()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return terms

    # intermediate values are dicts {exponent(dict var->int): coeff}
    def poly(self):
        sign = 1
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1 if self.take()[1] == "-" else 1
        acc = _scale(self.term(), sign)
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            sign = -1 if self.take()[1] == "-" else 1
            acc = _add(acc, _scale(self.term(), sign))
        return acc

    def term(self):
        acc = self.factor()
        while True:
            t = self.peek()
            if t[0] == "op" and t[1] == "*":
                self.take()
                acc = _mul(acc, self.factor())
            elif t[0] == "op" and t[1] == "/":
                self.take()
                d = self.factor()
                if len(d) != 1 or () not in d or d[()] == 0:
                    self.error("division only by nonzero constants", t)
                acc = _scale(acc, 1 / d[()] if isinstance(d[()], Fraction) else 1 / d[()])
            elif t[0] in ("num", "name") or (t[0] == "op" and t[1] == "("):
                acc = _mul(acc, self.factor())
            else:
                return acc

    def factor(self):
        t = self.take()
        if t[0] == "num":
            base = {(): to_exact(t[1])}
        elif t[0] == "name" and t[1] == "I":
            self.uses_i = True
            base = {(): mpmath.mpc(0, 1)}
        elif t[0] == "name":
            base = {((self.var_index(t), 1),): Fraction(1)}
        elif t[0] == "op" and t[1] == "(":
            base = self.poly()
            close = self.take()
            if close[1] != ")":
                self.error("expected ')'", close)
        else:
            self.error(f"unexpected {t[1] or 'end of input'!r}", t)
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            e = self.take()
            if e[0] != "num" or not e[1].isdigit():
                self.error("exponent must be a non-negative integer", e)
            out = {(): Fraction(1)}
            for _ in range(int(e[1])):
                out = _mul(out, base)
            return out
        return base

    def var_index(self, tok) -> int:
        name = tok[1]
        if self.names is not None:
            if name not in self.names:
                self.error(f"undeclared variable {name!r}", tok)
            return self.names.index(name)
        m = _XN.match(name)
        if not m or int(m.group(1)) < 1:
            self.error(f"variable {name!r} is not of the form x1..xn; declare names with 'vars:'", tok)
        self.seen.add(name)
        return int(m.group(1)) - 1


def _key(mono):
    return tuple(sorted(mono))


def _add(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return {k: v for k, v in out.items() if v != 0}


def _scale(a, s):
    return {k: v * s for k, v in a.items() if v * s != 0}


def _mul(a, b):
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            exps = dict(ka)
            for var, e in kb:
                exps[var] = exps.get(var, 0) + e
            k = _key(exps.items())
            out[k] = out.get(k, 0) + va * vb
    return {k: v for k, v in out.items() if v != 0}


def _to_poly(terms, nvars: int, as_float: bool) -> Polynomial:
    out = {}
    for mono, c in terms.items():
        alpha = [0] * nvars
        for var, e in mono:
            alpha[var] += e
        c = to_float(c) if as_float and not isinstance(c, mpmath.mpc) else c
        out[tuple(alpha)] = c
    return Polynomial(out, nvars)


def parse_polynomial(text: str, names: Sequence[str] | None = None, nvars: int | None = None,
                     line: int = 0) -> Polynomial:
    """Parse one expression.  ``nvars`` defaults to the largest ``x<i>`` seen."""
    p = _Parser(text, names, line)
    terms = p.parse()
    if names is not None:
        n = len(names)
    else:
        top = max((int(_XN.match(s).group(1)) for s in p.seen), default=0)
        n = nvars if nvars is not None else top
        if top > n:
            raise ParseError(f"variable x{top} exceeds the {n} declared variables", line)
    return _to_poly(terms, n, p.uses_i)


@dataclass
class SystemFile:
    polys: list
    names: list
    point: list | None = None
    tol: Fraction | None = None
    meta: dict = field(default_factory=dict)

    @property
    def nvars(self) -> int:
        return len(self.names)


def parse_point(text: str, line: int = 0) -> list:
    """Comma- or space-separated coordinates; ``a+bI`` style complex allowed."""
    out = []
    for part in re.split(r"[,\s]+", text.strip()):
        if not part:
            continue
        try:
            if "I" in part or "j" in part:
                out.append(mpmath.mpmathify(part.replace("*I", "j").replace("I", "j")))
            else:
                out.append(to_exact(part))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad coordinate {part!r}", line) from exc
    return out


def parse_system(text: str) -> SystemFile:
    names = None
    point = tol = None
    exprs = []
    meta = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        head, sep, rest = s.partition(":")
        key = head.strip().lower()
        if sep and key in ("vars", "point", "tol", "name"):
            if key == "vars":
                names = [v for v in re.split(r"[,\s]+", rest.strip()) if v]
                if len(set(names)) != len(names) or not names:
                    raise ParseError("bad variable declaration", ln)
                for v in names:
                    if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", v) or v == "I":
                        raise ParseError(f"bad variable name {v!r}", ln)
            elif key == "point":
                point = parse_point(rest, ln)
            elif key == "tol":
                try:
                    tol = to_exact(rest.strip())
                except (ValueError, ZeroDivisionError) as exc:
                    raise ParseError("bad tolerance", ln) from exc
            else:
                meta["name"] = rest.strip()
            continue
        exprs.append((ln, s))
    if not exprs:
        raise ParseError("no polynomials found")
    parsed = []
    if names is None:
        seen = set()
        for ln, s in exprs:
            p = _Parser(s, None, ln)
            p.parse()
            seen |= p.seen
        n = max(int(_XN.match(v).group(1)) for v in seen) if seen else 0
        names = [f"x{i + 1}" for i in range(n)]
    for ln, s in exprs:
        parsed.append(parse_polynomial(s, names, line=ln))
    if point is not None and len(point) != len(names):
        raise ParseError(f"point has {len(point)} coordinates for {len(names)} variables")
    if any(p.kind == "float" for p in parsed):
        parsed = [p.to_float() if p.kind == "exact" else p for p in parsed]
    return SystemFile(parsed, names, point, tol, meta)


def format_system(sf: SystemFile) -> str:
    lines = [f"vars: {' '.join(sf.names)}"]
    if sf.point is not None:
        lines.append("point: " + ", ".join(_fmt_coord(c) for c in sf.point))
    if sf.tol is not None:
        lines.append(f"tol: {sf.tol}")
    lines += [p.format(sf.names) for p in sf.polys]
    return "\n".join(lines) + "\n"


def _fmt_coord(c) -> str:
    if isinstance(c, Fraction):
        return str(c)
    if isinstance(c, mpmath.mpc):
        return mpmath.nstr(c, mpmath.mp.dps).replace("j", "I").replace(" ", "").strip("()")
    return mpmath.nstr(c, mpmath.mp.dps)
