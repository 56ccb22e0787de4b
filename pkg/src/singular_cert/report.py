"""Serialization and text rendering of certification reports."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from importlib import resources

import mpmath

from .certify import CertificationReport, MatrixCheck

SCHEMA_VERSION = 1


def schema() -> dict:
    return json.loads((resources.files(__package__) / "report_schema.json").read_text(encoding="utf-8"))


def _num(x):
    """Finite JSON number, ``[re, im]`` for complex values, ``None`` for infinities."""
    if x is None:
        return None
    if isinstance(x, mpmath.mpc):
        if x.imag == 0:
            x = x.real
        else:
            return [_num(x.real), _num(x.imag)]
    if isinstance(x, (mpmath.mpf, float, Fraction, int)):
        v = float(x)
        return v if math.isfinite(v) else None
    raise TypeError(f"not a number: {x!r}")


def _str(x) -> str:
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return mpmath.nstr(x, mpmath.mp.dps)
    return str(x)


def _check(c: MatrixCheck | None):
    if c is None:
        return None
    return {"name": c.name, "shape": list(c.shape), "sigma_min": _num(c.sigma_min),
            "sigma_lower": _num(c.sigma_lower), "lipschitz": _num(c.lipschitz), "passed": c.passed}


def to_json(report: CertificationReport, name: str | None = None, names=None) -> dict:
    n = report.nvars
    names = names or [f"x{i + 1}" for i in range(n)]
    nw = report.newton
    doc = {
        "schema_version": SCHEMA_VERSION,
        "system": name,
        "verdict": report.verdict,
        "reasons": list(report.reasons),
        "digits": report.digits,
        "structure": {
            "nvars": n,
            "multiplicity": report.multiplicity,
            "order": report.order,
            "basis": report.basis,
            "hilbert": report.hilbert,
            "kernel_singular_values": [[_num(s) for s in sv] for sv in report.kernel_singular_values],
            "stop_sigma_min": _num(report.stop_sigma_min),
        },
        "regularity": report.regularity,
        "parameters": report.parameters,
        "mu_names": report.mu_names,
        "stats": report.stats,
        "split": {k: (_num(v) if k == "sigma_min_J0" else v) for k, v in report.split.items()},
        "alpha": None if report.alpha is None else {
            "beta": _num(report.alpha.beta), "gamma_hat": _num(report.alpha.gamma_hat),
            "alpha_hat": _num(report.alpha.alpha_hat), "threshold": _num(report.alpha.threshold),
            "passed": report.alpha.passed},
        "sigma_cert": _check(report.sigma_cert),
        "sigma_reg": [_check(c) for c in report.sigma_reg],
        "lipschitz_f1": _num(report.lipschitz_f1),
        "eps_bound": _num(report.eps_bound),
        "eps_measured": {k: _num(v) for k, v in report.eps_measured.items()},
        "perturbation": {k: _num(v) for k, v in report.perturbation.items()},
        "perturbed_system": [p.format(names) for p in report.perturbed_system],
        "newton": None if nw is None else {
            "residuals_inf": [_num(r) for r in nw.residuals_inf],
            "residuals_2": [_num(r) for r in nw.residuals_2],
            "betas": [_num(b) for b in nw.betas],
            "iterations": nw.iterations,
            "converged": nw.converged,
            "quadratic": nw.quadratic,
            "rate_constant": _num(nw.rate_constant),
            "reason": nw.reason,
        },
        "start_point": [_str(v) for v in report.start_point],
        "final_point": [_str(v) for v in report.final_point],
        "full_residual_inf": _num(report.full_residual_inf),
        "consequence_residual": _num(report.consequence_residual),
        "timings": {k: float(v) for k, v in report.timings.items()},
    }
    return doc


def dumps(report: CertificationReport, name=None, names=None) -> str:
    return json.dumps(to_json(report, name, names), indent=2, allow_nan=False)


def _fmt(x, d=6) -> str:
    if x is None:
        return "-"
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return mpmath.nstr(x, d)
    return str(x)


def _mono(b, names) -> str:
    parts = [nm if e == 1 else f"{nm}^{e}" for nm, e in zip(names, b) if e]
    return "*".join(parts) or "1"


def render_text(report: CertificationReport, name: str | None = None, names=None) -> str:
    n = report.nvars
    names = names or [f"x{i + 1}" for i in range(n)]
    st = report.stats
    lines = []
    if name:
        lines.append(f"system      {name}")
    lines.append(f"verdict     {report.verdict}" + (f"  ({'; '.join(report.reasons)})" if report.reasons else ""))
    lines.append(f"r / n       {report.multiplicity}/{n}   order {report.order}   hilbert {report.hilbert}")
    lines.append("basis       {" + ", ".join(_mono(b, names) for b in report.basis) + "}")
    lines.append(f"IM {st['IM'][0]}x{st['IM'][1]}   SC {st['SC']}   #mu {st['n_mu']}   "
                 f"OS {st['OS'][0]}x{st['OS'][1]}   (rejecting K: {st['IM_stop'][0]}x{st['IM_stop'][1]})")
    lines.append(f"regular     {report.regular}   parameters {len(report.parameters)}")
    if report.split:
        lines.append("removed     " + (", ".join(report.split["removed"]) or "-"))
    if report.alpha is not None:
        a = report.alpha
        lines.append(f"C1 alpha    beta {_fmt(a.beta)}   gamma {_fmt(a.gamma_hat)}   "
                     f"alpha {_fmt(a.alpha_hat)} < {_fmt(a.threshold)}: {a.passed}")
        for c in report.sigma_reg:
            lines.append(f"C2 {c.name:<8} sigma {_fmt(c.sigma_min)}   L*beta {_fmt(c.lipschitz * a.beta)}: {c.passed}")
        if report.sigma_cert is not None:
            c = report.sigma_cert
            lines.append(f"C3 A_cert   sigma {_fmt(c.sigma_min)}   L*beta {_fmt(c.lipschitz * a.beta)}: {c.passed}")
    if report.newton is not None:
        nw = report.newton
        lines.append("newton      " + ", ".join(_fmt(r, 3) for r in nw.residuals_inf)
                     + f"   quadratic {nw.quadratic}")
        lines.append("point       (" + ", ".join(_fmt(v, 8) for v in report.final_point[:n]) + ")")
        if report.final_point[n:]:
            lines.append("mu          (" + ", ".join(_fmt(v, 8) for v in report.final_point[n:]) + ")")
        lines.append(f"|F|_inf     {_fmt(report.full_residual_inf, 3)}")
        lines.append(f"eps*        max {_fmt(report.eps_measured.get('max'), 4)}   bound {_fmt(report.eps_bound, 4)}")
        for k, v in report.perturbation.items():
            lines.append(f"  {k:<10} {_fmt(v, 8)}")
    return "\n".join(lines)
