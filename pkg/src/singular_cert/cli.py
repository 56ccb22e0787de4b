"""Command-line interface: ``singular-cert run | fixtures | bench``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import mpmath

from . import fixtures, report as report_mod
from .certify import certify_all
from .deflate import DeflationError
from .dualspace import StructureError, compute_multiplicity_structure
from .hilbparam import certificate_to_json, certify_regular_basis
from .parsing import ParseError, parse_point, parse_system
from .polycore import to_exact

EXIT_PASS, EXIT_INPUT, EXIT_FAIL = 0, 1, 2
DEFAULT_DIGITS = 32
ENV_DIGITS = "SINGULAR_CERT_DIGITS"

log = logging.getLogger("singular_cert")


class InputError(ValueError):
    pass


def default_digits() -> int:
    raw = os.environ.get(ENV_DIGITS)
    if raw is None:
        return DEFAULT_DIGITS
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"{ENV_DIGITS} must be an integer, got {raw!r}") from exc


def parse_removal(text: str) -> list:
    """``"L1(f2), L3(f3)"`` -> ``[(0, 1), (2, 2)]``."""
    pairs = re.findall(r"L\s*(\d+)\s*\(\s*f\s*(\d+)\s*\)", text)
    rest = re.sub(r"L\s*\d+\s*\(\s*f\s*\d+\s*\)|[,\s]", "", text)
    if rest or not pairs:
        raise InputError(f"cannot read removal set {text!r}; expected e.g. 'L1(f2),L1(f3)'")
    return [(int(i) - 1, int(j) - 1) for i, j in pairs]


def _load(args):
    if args.fixture and args.file:
        raise InputError("give either a file or --fixture, not both")
    if args.fixture:
        try:
            sf = fixtures.load(args.fixture)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from exc
        name = args.fixture
    elif args.file:
        try:
            with open(args.file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {args.file}: {exc.strerror}") from exc
        sf = parse_system(text)
        name = sf.meta.get("name", os.path.basename(args.file))
    else:
        raise InputError("no input: give a system file or --fixture NAME")
    if args.point:
        sf.point = parse_point(" ".join(args.point))
        if len(sf.point) != sf.nvars:
            raise InputError(f"--point has {len(sf.point)} coordinates for {sf.nvars} variables")
    if sf.point is None:
        raise InputError("no approximate root: add a 'point:' line or pass --point")
    if args.tol is not None:
        sf.tol = args.tol
    if sf.tol is None:
        sf.tol = Fraction(1, 100)
    if not sf.tol > 0:
        raise InputError("tolerance must be positive")
    return sf, name


def _positive_fraction(s: str) -> Fraction:
    try:
        v = to_exact(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from exc
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="singular-cert",
                                description="Multiplicity structure and certified deflation of singular roots.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="certify one system")
    r.add_argument("file", nargs="?", help="system file (see README for the format)")
    r.add_argument("--fixture", help="use a shipped benchmark system instead of a file")
    r.add_argument("--point", nargs="+", help="approximate root, e.g. --point 0.002,1.003,0.004")
    r.add_argument("--tol", type=_positive_fraction, help="numerical rank tolerance (default: file or 0.01)")
    r.add_argument("--digits", type=int, help=f"working precision (default {DEFAULT_DIGITS}, env {ENV_DIGITS})")
    r.add_argument("--json", metavar="OUT", help="write the JSON report here ('-' for stdout)")
    r.add_argument("--param-only", action="store_true",
                   help="stop after the structure and the regularity certificate")
    r.add_argument("--remove", help="equations to leave out of the square system, e.g. 'L1(f1),L2(f2)'")
    r.add_argument("--rule", choices=["threshold", "pivoted"], default="threshold",
                   help="row selection for the square system")
    r.add_argument("--newton-tol", type=_positive_fraction, help="Newton stopping tolerance (default 10^(2-digits))")
    r.add_argument("--maxiter", type=int, default=30)
    r.add_argument("--quiet", action="store_true", help="no text report")

    f = sub.add_parser("fixtures", help="list or print the shipped systems")
    f.add_argument("--show", metavar="NAME", help="print one system file")

    b = sub.add_parser("bench", help="run shipped fixtures and print structural statistics")
    b.add_argument("names", nargs="*", help="fixtures to run (default: all)")
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.add_argument("--digits", type=int)
    b.add_argument("--json", metavar="OUT", help="write all reports as one JSON document")
    return p


def _digits(args) -> int:
    d = args.digits if args.digits is not None else default_digits()
    if d < 16:
        raise InputError("precision must be at least 16 digits")
    return d


def _param_only(sf, name, args, out) -> int:
    struct = compute_multiplicity_structure(sf.polys, sf.point, sf.tol)
    cert = certify_regular_basis(struct.basis, struct.nvars)
    par = cert.parametrization
    names = sf.names
    if not args.quiet:
        basis = ", ".join("*".join(f"{v}^{e}" if e > 1 else v for v, e in zip(names, b) if e) or "1"
                          for b in struct.basis)
        out.write(f"system      {name}\nr / n       {struct.multiplicity}/{struct.nvars}\n")
        out.write(f"basis       {{{basis}}}\nregular     {cert.regular}\n")
        if par is not None:
            out.write(f"parameters  {', '.join(par.params) or '-'}\n")
            for k, v in par.dependent().items():
                out.write(f"  {k} = {v.as_expr()}\n")
            for rec in cert.records:
                if rec.areg_cols:
                    out.write(f"  det A_reg,{rec.t} = {rec.det.as_expr()}\n")
    if args.json:
        doc = {"system": name, "certificate": certificate_to_json(cert)}
        _write_json(doc, args.json, out)
    return EXIT_PASS if cert.regular else EXIT_FAIL


def _write_json(doc, dest, out):
    text = json.dumps(doc, indent=2, allow_nan=False)
    if dest == "-":
        out.write(text + "\n")
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    sf, name = _load(args)
    remove = parse_removal(args.remove) if args.remove else None
    with mpmath.workdps(_digits(args)):
        if args.param_only:
            return _param_only(sf, name, args, out)
        newton_tol = mpmath.mpf(args.newton_tol.numerator) / args.newton_tol.denominator \
            if args.newton_tol else None
        rep = certify_all(sf.polys, sf.point, sf.tol, remove=remove, rule=args.rule,
                          newton_tol=newton_tol, maxiter=args.maxiter)
        if not args.quiet:
            out.write(report_mod.render_text(rep, name, sf.names) + "\n")
        if args.json:
            _write_json(report_mod.to_json(rep, name, sf.names), args.json, out)
    return EXIT_PASS if rep.verdict == "PASS" else EXIT_FAIL


def _bench_one(job):
    name, digits = job
    sf = fixtures.load(name)
    with mpmath.workdps(digits):
        try:
            rep = certify_all(sf.polys, sf.point, sf.tol)
        except (StructureError, DeflationError) as exc:
            return name, None, str(exc)
        return name, report_mod.to_json(rep, name, sf.names), None


def cmd_bench(args, out=None) -> int:
    out = out or sys.stdout
    names = args.names or fixtures.names()
    known = set(fixtures.names())
    bad = [n for n in names if n not in known]
    if bad:
        raise InputError(f"unknown fixtures: {', '.join(bad)}")
    digits = _digits(args)
    jobs = [(n, digits) for n in names]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_bench_one, jobs))
    else:
        results = [_bench_one(j) for j in jobs]
    out.write(f"{'system':<16}{'r/n':>6}{'IM':>9}{'SC':>5}{'#mu':>5}{'OS':>9}  verdict\n")
    status = EXIT_PASS
    for name, doc, err in results:
        if doc is None:
            out.write(f"{name:<16}  error: {err}\n")
            status = EXIT_FAIL
            continue
        s = doc["stats"]
        rn = f"{doc['structure']['multiplicity']}/{doc['structure']['nvars']}"
        out.write(f"{name:<16}{rn:>6}{'x'.join(map(str, s['IM'])):>9}{s['SC']:>5}{s['n_mu']:>5}"
                  f"{'x'.join(map(str, s['OS'])):>9}  {doc['verdict']}\n")
        if doc["verdict"] != "PASS":
            status = EXIT_FAIL
    if args.json:
        _write_json({name: doc for name, doc, _ in results}, args.json, out)
    return status


def cmd_fixtures(args, out=None) -> int:
    out = out or sys.stdout
    if args.show:
        try:
            out.write(fixtures.text(args.show))
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from exc
    else:
        for n in fixtures.names():
            out.write(n + "\n")
    return EXIT_PASS


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_fixtures(args)
    except (InputError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StructureError, DeflationError) as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
