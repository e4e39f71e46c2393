"""Command-line front end for the heat-trace expansion machinery.

Subcommands
    expand            symbolic expansion table, optional evaluation at t
    coeff             expansion coefficients only (optionally a single j)
    verify-harmonic   exact identity against the closed-form harmonic trace
    verify-paper      numeric check of the published example tables
    verify-numeric    expansion vs finite-difference spectral trace
    oracle-quadrature radial integrals: quadrature vs truncated expansion

Output formats: human (default), json (stable key order, byte-identical
for identical jobs), csv (numeric tables only).  Exit codes: 0 success or
all-PASS, 2 usage error, 3 computation error, 4 verification failure.
The environment variable HEATTRACE_MAX_K caps the recursion depth.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from . import __version__
from .assembly import (
    TraceExpansion,
    eval_expansion,
    i_expansion_eval,
    trace_expansion,
)
from .exactalg import Rational, rat
from .oracles import (
    SpectralConfig,
    harmonic_trace_series,
    quadrature_I,
    remainder_order_probe,
    spectral_trace,
)
from .parametrix import PotentialSpec, build_parametrix

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_COMPUTE = 3
EXIT_VERIFY = 4


class PotentialParseError(ValueError):
    """Invalid potential expression (syntax or constraint violation)."""


class OddPowerError(PotentialParseError):
    """The expression contains an odd power of r."""


class NonPositiveLeadingError(PotentialParseError):
    """The leading coefficient is missing, zero, or negative."""


_TERM_RE = re.compile(
    r"(?P<rat>[0-9]+(?:/[0-9]+)?)(?:\*r\^(?P<pow1>[0-9]+))?$|r\^(?P<pow2>[0-9]+)$|r$|(?P<rat2>[0-9]+(?:/[0-9]+)?)\*r$"
)


def parse_potential(text: str, dimension: int = 3) -> PotentialSpec:
    """Parse a potential expression like ``1 + 2*r^2 + 3/2*r^4``.

    Terms are RAT, RAT*r^EVEN, or r^EVEN with RAT an integer or p/q;
    whitespace is ignored and terms are joined by + or -.  Odd powers,
    a nonpositive leading coefficient, and empty input are rejected.
    """
    squeezed = "".join(text.split())
    if not squeezed:
        raise PotentialParseError("empty potential expression")
    coeffs: Dict[int, Rational] = {}
    pos = 0
    length = len(squeezed)
    first = True
    while pos < length:
        sign = 1
        ch = squeezed[pos]
        if ch == "+" or ch == "-":
            sign = -1 if ch == "-" else 1
            pos += 1
        elif not first:
            raise PotentialParseError(
                f"syntax error at position {pos}: expected '+' or '-', found {ch!r}"
            )
        first = False
        nxt_plus = squeezed.find("+", pos)
        nxt_minus = squeezed.find("-", pos)
        ends = [i for i in (nxt_plus, nxt_minus) if i != -1]
        end = min(ends) if ends else length
        term = squeezed[pos:end]
        if not term:
            raise PotentialParseError(f"syntax error at position {pos}: empty term")
        m = _TERM_RE.match(term)
        if not m:
            raise PotentialParseError(
                f"syntax error at position {pos}: cannot parse term {term!r}"
            )
        if term == "r" or m.group("rat2") is not None or m.group("pow2") == "1":
            raise OddPowerError(f"odd power of r in term {term!r} (position {pos})")
        try:
            if m.group("pow1") is not None:
                degree = int(m.group("pow1"))
                value = Fraction(m.group("rat"))
            elif m.group("pow2") is not None:
                degree = int(m.group("pow2"))
                value = Fraction(1)
            else:
                degree = 0
                value = Fraction(m.group("rat"))
        except ZeroDivisionError:
            raise PotentialParseError(
                f"zero denominator in term {term!r} (position {pos})"
            ) from None
        if degree % 2:
            raise OddPowerError(f"odd power r^{degree} rejected (position {pos})")
        coeffs[degree] = coeffs.get(degree, rat(0)) + sign * rat(value)
        pos = end
    top = max((d for d, c in coeffs.items() if c), default=0)
    if top < 2:
        raise NonPositiveLeadingError("potential needs a growing term c_q*r^q with q >= 2")
    if coeffs[top] <= 0:
        raise NonPositiveLeadingError(f"leading coefficient of r^{top} must be positive")
    try:
        return PotentialSpec.from_coeffs(dimension, coeffs)
    except ValueError as exc:
        raise PotentialParseError(str(exc)) from exc


@dataclass(frozen=True)
class JobSpec:
    """One validated CLI job; every field is checked before any computation."""

    command: str
    dim: int = 3
    potential: PotentialSpec | None = None
    order: int = 0
    t_values: Tuple[float, ...] = ()
    fmt: str = "human"
    case: str | None = None
    coupling: Rational | None = None
    j_select: int | None = None
    k_values: Tuple[int, ...] = ()
    tol: float = 1e-3
    grid_n: int | None = None
    rmax: float | None = None
    lmax: int | None = None

    def spectral_config(self) -> SpectralConfig:
        kwargs = {}
        if self.grid_n is not None:
            kwargs["grid_n"] = self.grid_n
        if self.rmax is not None:
            kwargs["rmax"] = self.rmax
        if self.lmax is not None:
            kwargs["l_max"] = self.lmax
        return SpectralConfig(**kwargs)

    def echo(self) -> dict:
        out: dict = {"command": self.command, "format": self.fmt}
        if self.potential is not None:
            out["dim"] = self.dim
            out["potential"] = str(self.potential)
            out["order"] = self.order
        if self.case is not None:
            out["case"] = self.case
        if self.coupling is not None:
            out["coupling"] = _rat_str(self.coupling)
            out["dim"] = self.dim
            out["order"] = self.order
        if self.t_values:
            out["t"] = list(self.t_values)
        if self.k_values:
            out["k"] = list(self.k_values)
        if self.grid_n is not None:
            out["grid_n"] = self.grid_n
        if self.rmax is not None:
            out["rmax"] = self.rmax
        if self.lmax is not None:
            out["lmax"] = self.lmax
        return out


def _rat_str(x: Rational) -> str:
    return str(Fraction(int(x.numerator), int(x.denominator)))


def _atoms_json(value) -> List[dict]:
    return [
        {
            "rational": _rat_str(c),
            "pi_half_power": h,
            "gamma_residue": _rat_str(rho),
            "cq_exponent": _rat_str(e),
        }
        for c, h, rho, e in value.atoms()
    ]


def _atoms_human(value) -> str:
    if value.is_zero():
        return "0"
    parts = []
    for c, h, rho, e in value.atoms():
        bits = [_rat_str(c)]
        if h:
            bits.append(f"pi^({h}/2)" if h != 2 else "pi")
        if rho != 1:
            bits.append(f"Gamma({_rat_str(rho)})")
        if e:
            bits.append(f"cq^({_rat_str(e)})")
        parts.append(" * ".join(bits))
    return "  +  ".join(parts)


def _expansion_payload(job: JobSpec, exp: TraceExpansion, with_eval: bool) -> dict:
    q = exp.potential.q
    terms = []
    for j in range(exp.order + 1):
        if job.j_select is not None and j != job.j_select:
            continue
        aj = exp.coefficients[j]
        terms.append(
            {
                "j": j,
                "t_power": _rat_str(exp.leading_power + rat(j, q)),
                "atoms": _atoms_json(aj),
                "float": aj.eval(exp.potential.cq),
            }
        )
    payload = {
        "job": job.echo(),
        "leading_power": _rat_str(exp.leading_power),
        "remainder_power": _rat_str(exp.remainder_power),
        "prefactor": _atoms_json(exp.prefactor),
        "terms": terms,
    }
    if with_eval and job.t_values:
        payload["eval"] = [
            {"t": t, "value": eval_expansion(exp, t)} for t in job.t_values
        ]
    return payload


def _print_payload_human(payload: dict, exp: TraceExpansion) -> None:
    print(f"potential : V(r) = {payload['job']['potential']} on R^{payload['job']['dim']}")
    print(f"leading   : t^({payload['leading_power']})")
    print(f"prefactor : {_atoms_human(exp.prefactor)}")
    print(f"remainder : O(t^({payload['remainder_power']}))")
    print("terms     :")
    for row in payload["terms"]:
        aj = exp.coefficients[row["j"]]
        print(
            f"  j={row['j']:>2}  t^({row['t_power']:>6})  "
            f"{row['float']: .15e}  {_atoms_human(aj)}"
        )
    for row in payload.get("eval", []):
        print(f"eval t={row['t']:g}: {row['value']:.15e}")


def run_expand(job: JobSpec) -> int:
    """expand/coeff: compute the symbolic expansion and print it."""
    exp = trace_expansion(job.potential, job.dim, job.order)
    payload = _expansion_payload(job, exp, with_eval=job.command == "expand")
    if job.fmt == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        _print_payload_human(payload, exp)
    return EXIT_OK


def _verify_harmonic_checks(dim: int, c: Rational, order: int) -> List[dict]:
    """Exact coefficient-by-coefficient comparison against the closed form."""
    pot = PotentialSpec.from_coeffs(dim, {2: c})
    exp = trace_expansion(pot, dim, order)
    series = harmonic_trace_series(dim, c, order=-dim + order // 2)
    checks = []
    for j in range(order + 1):
        combined = exp.combined_coefficient(j).grounded(c)
        power = exp.leading_power + rat(j, 2)
        if power.denominator == 1:
            r = series.coeff(int(power))
            e = rat(power, 2)
            fl = e.numerator // e.denominator
            want = {(0, rat(1), e - fl): r * c**fl} if r else {}
        else:
            want = {}  # half-integer powers are absent from the closed form
        checks.append(
            {
                "j": j,
                "t_power": _rat_str(power),
                "pass": combined == want,
                "computed": {f"pi^{k[0]}/2*G({k[1]})*c^{k[2]}": _rat_str(v) for k, v in combined.items()},
            }
        )
    return checks


def run_verify(job: JobSpec) -> int:
    """Dispatch one of the verification commands; 0 only if everything passes."""
    if job.command == "verify-harmonic":
        checks = _verify_harmonic_checks(job.dim, job.coupling, job.order)
        verification = {"mode": "harmonic-exact", "checks": checks}
    elif job.command == "verify-paper":
        verification = _verify_paper(job.case)
    elif job.command == "verify-numeric":
        verification = _verify_numeric(job)
    else:  # pragma: no cover
        raise ValueError(f"unknown verify command {job.command}")

    all_pass = all(c["pass"] for c in verification["checks"])
    verification["all_pass"] = all_pass
    payload = {"job": job.echo(), "verification": verification}
    if job.fmt == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    elif job.fmt == "csv" and job.command == "verify-numeric":
        _print_numeric_csv(verification)
    else:
        for c in verification["checks"]:
            status = "PASS" if c["pass"] else "FAIL"
            label = c.get("label") or f"j={c.get('j')}"
            extra = c.get("detail", "")
            print(f"{status}  {label}  {extra}")
        print("RESULT:", "PASS" if all_pass else "FAIL")
    if not all_pass:
        first = next(c for c in verification["checks"] if not c["pass"])
        print(
            f"first failure: {first.get('label') or first.get('j')}",
            file=sys.stderr,
        )
        return EXIT_VERIFY
    return EXIT_OK


def _paper_quartic_table(c0: float, c2: float, c4: float) -> Dict[int, float]:
    g14, g34 = math.gamma(0.25), math.gamma(0.75)
    return {
        0: g34 / 4,
        2: -c2 / (16 * math.sqrt(c4)) * g14,
        4: (3 / 32 * c2**2 - c0 * c4 / 4) * g34 / c4,
        6: -(5 / 384 * c2**3 - c0 * c2 * c4 / 16 + 5 / 48 * c4**2) * g14 / c4**1.5,
        8: (7 / 512 * c2**4 - 3 / 32 * c0 * c2**2 * c4 + 3 / 16 * c2 * c4**2 + c0**2 * c4**2 / 8)
        * g34
        / c4**2,
        10: -(
            3 / 2048 * c2**5
            - 5 / 384 * c0 * c2**3 * c4
            + 13 / 384 * c2**2 * c4**2
            + c0**2 * c2 * c4**2 / 32
            - 5 / 48 * c0 * c4**3
        )
        * g14
        / c4**2.5,
    }


def _paper_sestic_table(c0: float, c2: float, c4: float, c6: float) -> Dict[int, float]:
    g16, g56 = math.gamma(1 / 6), math.gamma(5 / 6)
    rpi = math.sqrt(math.pi)
    return {
        0: rpi / 6,
        2: -c4 / (36 * c6 ** (2 / 3)) * g16,
        4: (5 / 72 * c4**2 - c2 * c6 / 6) * g56 / c6 ** (4 / 3),
        6: -rpi * (c4**3 / 48 - c2 * c4 * c6 / 12 + c0 * c6**2 / 6) / c6**2,
        8: (
            91 / 31104 * c4**4
            - 7 / 432 * c2 * c4**2 * c6
            + c0 * c4 * c6**2 / 36
            + c2**2 * c6**2 / 72
            - 7 / 72 * c6**3
        )
        * g16
        / c6 ** (8 / 3),
        10: -(
            187 / 31104 * c4**5
            - 55 / 1296 * c2 * c4**3 * c6
            + 5 / 72 * c2**2 * c4 * c6**2
            + 5 / 72 * c0 * c4**2 * c6**2
            - c0 * c2 * c6**3 / 6
            - 5 / 24 * c4 * c6**3
        )
        * g56
        / c6 ** (10 / 3),
    }


_PAPER_CASES = {
    "harmonic3d": {"coeffs": {2: 1}, "order": 8},
    "quartic3d": {"coeffs": {0: 1, 2: 2, 4: 3}, "order": 10},
    "sestic3d": {"coeffs": {0: 1, 2: 1, 4: 1, 6: 1}, "order": 10},
}


def _verify_paper(case: str) -> dict:
    fixture = _PAPER_CASES[case]
    pot = PotentialSpec.from_coeffs(3, fixture["coeffs"])
    order = fixture["order"]
    exp = trace_expansion(pot, 3, order)
    cq = pot.cq
    if case == "harmonic3d":
        # the published harmonic list stops at a_4; orders 5..8 are checked
        # through the combined Laurent coefficients instead
        table = {0: math.sqrt(math.pi) / 4, 4: -math.sqrt(math.pi) / 8 * float(cq)}
        table_orders = range(5)
        combined = {0: 0.125, 4: -0.0625, 8: 17.0 / 960.0}
    elif case == "quartic3d":
        cs = [float(pot.coefficient(d)) for d in (0, 2, 4)]
        table = _paper_quartic_table(*cs)
        table_orders = range(order + 1)
        combined = None
    else:
        cs = [float(pot.coefficient(d)) for d in (0, 2, 4, 6)]
        table = _paper_sestic_table(*cs)
        table_orders = range(order + 1)
        combined = None
    checks = []
    for j in table_orders:
        got = exp.coefficients[j].eval(cq)
        want = table.get(j, 0.0)
        if want == 0.0:
            ok = abs(got) <= 1e-10
            detail = f"a_{j}: |{got:.3e}| (expect 0)"
        else:
            rel = abs(got - want) / abs(want)
            ok = rel <= 1e-10
            detail = f"a_{j}: rel diff {rel:.3e}"
        checks.append({"label": f"a_{j}", "pass": ok, "detail": detail, "j": j})
    if combined:
        pref = exp.prefactor.eval(cq)
        for j, want in combined.items():
            got = pref * exp.coefficients[j].eval(cq)
            rel = abs(got - want) / abs(want)
            checks.append(
                {
                    "label": f"combined_{j}",
                    "pass": rel <= 1e-10,
                    "detail": f"prefactor*a_{j}: rel diff {rel:.3e}",
                    "j": j,
                }
            )
    return {"mode": f"paper-{case}", "checks": checks}


def _verify_numeric(job: JobSpec) -> dict:
    exp = trace_expansion(job.potential, job.dim, job.order)
    cfg = job.spectral_config()
    rows = []
    checks = []
    for t in job.t_values:
        oracle, err = spectral_trace(job.potential, t, cfg)
        approx = eval_expansion(exp, t)
        rel = abs(oracle - approx) / abs(oracle)
        rows.append(
            {"t": t, "expansion": approx, "oracle": oracle, "rel_diff": rel, "oracle_error": err}
        )
        checks.append(
            {
                "label": f"t={t:g}",
                "pass": rel <= job.tol,
                "detail": f"rel diff {rel:.3e} (tol {job.tol:g})",
            }
        )
    alpha = None
    if len(job.t_values) >= 2:
        ts = sorted(job.t_values, reverse=True)
        pairs = [(ts[i], ts[i + 1]) for i in range(len(ts) - 1)]
        probe = remainder_order_probe(exp, job.potential, pairs, cfg)
        alpha = probe.alpha
        if probe.noise_floor:
            checks.append(
                {
                    "label": "remainder-exponent",
                    "pass": True,
                    "detail": "noise floor: expansion already at oracle accuracy",
                }
            )
        else:
            # Vanishing coefficients past J make the error decay faster than
            # the remainder order, so only a slower decay is a failure.
            want = float(exp.remainder_power)
            checks.append(
                {
                    "label": "remainder-exponent",
                    "pass": probe.alpha >= want - 0.3,
                    "detail": f"fitted {probe.alpha:.3f} vs remainder power {want:.3f} (>= -0.3)",
                }
            )
    out = {"mode": "numeric", "table": rows, "checks": checks}
    if alpha is not None and not math.isnan(alpha):
        out["fitted_alpha"] = alpha
    return out


def _print_numeric_csv(verification: dict) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["t", "expansion", "oracle", "rel_diff", "oracle_error"])
    for row in verification["table"]:
        writer.writerow(
            [row["t"], row["expansion"], row["oracle"], row["rel_diff"], row["oracle_error"]]
        )
    if "fitted_alpha" in verification:
        writer.writerow(["fitted_alpha", verification["fitted_alpha"], "", "", ""])


def run_quadrature(job: JobSpec) -> int:
    """oracle-quadrature: radial integral via quadrature vs truncated expansion."""
    pot = job.potential
    kmax = max(job.k_values)
    pset = build_parametrix(pot, kmax)
    rows = []
    for k in job.k_values:
        for t in job.t_values:
            quad = quadrature_I(k, t, pot, pset.diag[k])
            approx = i_expansion_eval(job.dim, k, pot, pset.diag[k], job.order, t)
            denom = max(abs(quad), 1e-300)
            rows.append(
                {
                    "k": k,
                    "t": t,
                    "quadrature": quad,
                    "expansion": approx,
                    "rel_diff": abs(quad - approx) / denom,
                }
            )
    payload = {"job": job.echo(), "verification": {"mode": "quadrature", "table": rows}}
    if job.fmt == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    elif job.fmt == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["k", "t", "quadrature", "expansion", "rel_diff"])
        for r in rows:
            writer.writerow([r["k"], r["t"], r["quadrature"], r["expansion"], r["rel_diff"]])
    else:
        for r in rows:
            print(
                f"k={r['k']}  t={r['t']:g}  quadrature {r['quadrature']:.12e}  "
                f"expansion {r['expansion']:.12e}  rel diff {r['rel_diff']:.3e}"
            )
    return EXIT_OK


def _read_potential_arg(raw: str, dim: int) -> PotentialSpec:
    if raw.startswith("@"):
        with open(raw[1:], "r", encoding="utf-8") as fh:
            raw = fh.readline()
    return parse_potential(raw, dim)


def _parse_t_list(raw: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--t: not a number list: {raw!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("--t: empty list")
    if any(t <= 0 for t in values):
        raise argparse.ArgumentTypeError("--t: all values must be positive")
    return values


def _parse_k_list(raw: str) -> Tuple[int, ...]:
    try:
        values = tuple(int(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--k: not an integer list: {raw!r}") from exc
    if not values or any(k < 0 for k in values):
        raise argparse.ArgumentTypeError("--k: need nonnegative integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heattrace",
        description="Small-t expansion of Tr exp(-tH) for radial polynomial potentials.",
        epilog="HEATTRACE_MAX_K caps the recursion depth (default 12).",
    )
    parser.add_argument("--version", action="version", version=f"heattrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_t=True, with_csv=False):
        p.add_argument("--dim", type=int, default=3, help="space dimension n (default 3)")
        p.add_argument("--potential", required=True, help="expression or @file")
        p.add_argument("--order", type=int, default=8, help="number J of t^(1/q) steps")
        if with_t:
            p.add_argument("--t", type=_parse_t_list, default=(), help="comma list of t values")
        # csv carries only numeric tables; symbolic atoms need human or json
        choices = ["human", "json", "csv"] if with_csv else ["human", "json"]
        p.add_argument("--format", choices=choices, default="human")

    p = sub.add_parser("expand", help="symbolic expansion, optionally evaluated at t")
    common(p)
    p = sub.add_parser("coeff", help="expansion coefficients only")
    common(p, with_t=False)
    p.add_argument("--j", type=int, default=None, help="print only coefficient j")

    p = sub.add_parser("verify-harmonic", help="exact check against the closed form")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--c", default="1", help="harmonic coupling (rational)")
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--format", choices=["human", "json"], default="human")

    p = sub.add_parser("verify-paper", help="check the published example tables")
    p.add_argument("--case", choices=sorted(_PAPER_CASES), required=True)
    p.add_argument("--format", choices=["human", "json"], default="human")

    p = sub.add_parser("verify-numeric", help="expansion vs spectral oracle")
    common(p, with_csv=True)
    p.add_argument("--tol", type=float, default=1e-3, help="relative tolerance per t")
    p.add_argument("--grid-n", type=int, default=None, dest="grid_n")
    p.add_argument("--rmax", type=float, default=None)
    p.add_argument("--lmax", type=int, default=None)

    p = sub.add_parser("oracle-quadrature", help="quadrature vs expansion of the radial integrals")
    common(p, with_csv=True)
    p.add_argument("--k", type=_parse_k_list, default=(0, 2, 3), help="comma list of k")
    return parser


def _job_from_args(args: argparse.Namespace) -> JobSpec:
    cmd = args.command
    fmt = getattr(args, "format", "human")
    if cmd == "verify-harmonic":
        if args.dim < 1:
            raise PotentialParseError("--dim must be a positive integer")
        if args.order < 0:
            raise PotentialParseError("--order must be nonnegative")
        try:
            c = rat(Fraction(args.c))
        except (ValueError, ZeroDivisionError) as exc:
            raise PotentialParseError(f"--c: not a rational: {args.c!r}") from exc
        if c <= 0:
            raise PotentialParseError("--c must be positive")
        return JobSpec(command=cmd, dim=args.dim, coupling=c, order=args.order, fmt=fmt)
    if cmd == "verify-paper":
        return JobSpec(command=cmd, case=args.case, fmt=fmt)
    if args.dim < 1:
        raise PotentialParseError("--dim must be a positive integer")
    if args.order < 0:
        raise PotentialParseError("--order must be nonnegative")
    pot = _read_potential_arg(args.potential, args.dim)
    kwargs = dict(
        command=cmd,
        dim=args.dim,
        potential=pot,
        order=args.order,
        fmt=fmt,
        t_values=tuple(getattr(args, "t", ()) or ()),
    )
    if cmd == "coeff":
        kwargs["j_select"] = args.j
        if args.j is not None and not 0 <= args.j <= args.order:
            raise PotentialParseError("--j must lie between 0 and --order")
    if cmd == "verify-numeric":
        if not kwargs["t_values"]:
            raise PotentialParseError("verify-numeric requires --t")
        if args.tol <= 0:
            raise PotentialParseError("--tol must be positive")
        kwargs.update(tol=args.tol, grid_n=args.grid_n, rmax=args.rmax, lmax=args.lmax)
    if cmd == "oracle-quadrature":
        if not kwargs["t_values"]:
            raise PotentialParseError("oracle-quadrature requires --t")
        kwargs["k_values"] = tuple(args.k)
    return JobSpec(**kwargs)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        job = _job_from_args(args)
    except (PotentialParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if job.command in ("expand", "coeff"):
            return run_expand(job)
        if job.command.startswith("verify-"):
            return run_verify(job)
        if job.command == "oracle-quadrature":
            return run_quadrature(job)
    except (ValueError, RuntimeError) as exc:
        if job.fmt == "json":
            print(json.dumps({"error": str(exc)}, sort_keys=True))
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    raise AssertionError(f"unhandled command {job.command}")  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
