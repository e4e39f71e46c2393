"""Assembly of the small-t trace expansion from the diagonal coefficients.

The trace of exp(-tH) for a radial polynomial potential of top degree q
expands in powers of t^(1/q):

    K(t) ~ prefactor * t^(-n/2 - n/q) * sum_j a_j t^(j/q).

Each a_j is an exact symbolic scalar: a sum of atoms of the form
rational * pi^(h/2) * Gamma(rho) * c_q^e, with Gamma arguments reduced into
(0, 1].  Two independent bookkeeping routes produce the a_j: a direct
double-sum formula per coefficient (``trace_expansion``) and a Cauchy
product of the radial and exponential-tail series integrated termwise
(``series_assembly_direct``); they must agree atom for atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from .exactalg import RadialPoly, Rational, RatLike, rat
from .parametrix import (
    ParametrixSet,
    PotentialSpec,
    build_parametrix,
    degree_bound,
)


class DegreeExceedsGammaError(ValueError):
    """A diagonal coefficient exceeded its proven r-degree bound."""


def gamma_k(k: int, q: int) -> int:
    """Highest power of r in the diagonal coefficient A_k (0 for k <= 1)."""
    return degree_bound(k, q)


def gamma_half(n: int) -> Tuple[Rational, int]:
    """Gamma(n/2) as (rational, h) meaning rational * pi^(h/2)."""
    if n < 1:
        raise ValueError("n must be positive")
    if n % 2 == 0:
        return rat(math.factorial(n // 2 - 1)), 0
    dfac = 1
    for odd in range(1, n - 1, 2):
        dfac *= odd
    return Rational(dfac, 2 ** ((n - 1) // 2)), 1


def sphere_area_constant(n: int) -> Tuple[Rational, int]:
    """Surface factor 2 pi^(n/2) / Gamma(n/2) as (rational, h)."""
    g, h = gamma_half(n)
    return 2 / g, n - h


class CoeffValue:
    """Exact scalar: finite sum of rational * pi^(h/2) * Gamma(rho) * c_q^e.

    Canonical form: Gamma arguments lie in (0, 1] (larger arguments are
    reduced through Gamma(z) = (z-1) Gamma(z-1)), Gamma(1/2) is rewritten
    as pi^(1/2), Gamma(1) is dropped (stored as rho = 1), atoms with equal
    (h, rho, e) are merged and zero atoms removed.  Values are immutable.
    """

    __slots__ = ("_atoms",)

    def __init__(self, atoms: Dict[Tuple[int, Rational, Rational], Rational] | None = None):
        self._atoms: Dict[Tuple[int, Rational, Rational], Rational] = {}
        if atoms:
            for key, c in atoms.items():
                if c:
                    self._atoms[key] = c

    @classmethod
    def zero(cls) -> "CoeffValue":
        return cls()

    @classmethod
    def rational(cls, c: RatLike) -> "CoeffValue":
        c = rat(c)
        return cls({(0, rat(1), rat(0)): c} if c else None)

    @classmethod
    def atom(cls, coef: RatLike, pi_half: int = 0, gamma_arg: RatLike = 1, cq_exp: RatLike = 0) -> "CoeffValue":
        """Single canonicalized atom coef * pi^(pi_half/2) * Gamma(gamma_arg) * c_q^cq_exp."""
        coef = rat(coef)
        if not coef:
            return cls()
        z = rat(gamma_arg)
        if z <= 0:
            raise ValueError(f"nonpositive Gamma argument {z}")
        while z > 1:
            z -= 1
            coef *= z
        h = pi_half
        if z == Rational(1, 2):
            h += 1
            z = rat(1)
        return cls({(h, z, rat(cq_exp)): coef})

    def is_zero(self) -> bool:
        return not self._atoms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoeffValue):
            return NotImplemented
        return self._atoms == other._atoms

    def __hash__(self):  # pragma: no cover
        return hash(frozenset(self._atoms.items()))

    def __add__(self, other: "CoeffValue") -> "CoeffValue":
        out = dict(self._atoms)
        for key, c in other._atoms.items():
            w = out.get(key)
            if w is None:
                out[key] = c
            else:
                w = w + c
                if w:
                    out[key] = w
                else:
                    del out[key]
        res = CoeffValue()
        res._atoms = out
        return res

    def __neg__(self) -> "CoeffValue":
        res = CoeffValue()
        res._atoms = {k: -c for k, c in self._atoms.items()}
        return res

    def __sub__(self, other: "CoeffValue") -> "CoeffValue":
        return self + (-other)

    def scale(self, c: RatLike) -> "CoeffValue":
        c = rat(c)
        if not c:
            return CoeffValue()
        res = CoeffValue()
        res._atoms = {k: v * c for k, v in self._atoms.items()}
        return res

    def combine(self, other: "CoeffValue") -> "CoeffValue":
        """Product with a Gamma-free value (every atom of ``other`` has rho = 1)."""
        out: Dict[Tuple[int, Rational, Rational], Rational] = {}
        for (h2, rho2, e2), c2 in other._atoms.items():
            if rho2 != 1:
                raise ValueError("can only combine with Gamma-free values")
            for (h1, rho1, e1), c1 in self._atoms.items():
                key = (h1 + h2, rho1, e1 + e2)
                w = out.get(key)
                v = c1 * c2
                out[key] = v if w is None else w + v
        res = CoeffValue()
        res._atoms = {k: v for k, v in out.items() if v}
        return res

    def atoms(self) -> Tuple[Tuple[Rational, int, Rational, Rational], ...]:
        """Atoms as (rational, pi_half_power, gamma_residue, cq_exponent), sorted."""
        items = sorted(self._atoms.items(), key=lambda kv: (kv[0][2], kv[0][1], kv[0][0]))
        return tuple((c, h, rho, e) for (h, rho, e), c in items)

    def eval(self, cq: RatLike | float) -> float:
        """Numeric value given the leading potential coefficient c_q."""
        cqf = float(cq)
        total = 0.0
        for c, h, rho, e in self.atoms():
            term = float(c)
            if h:
                term *= math.pi ** (h / 2.0)
            if rho != 1:
                term *= math.gamma(float(rho))
            if e:
                term *= cqf ** float(e)
            total += term
        return total

    def grounded(self, cq: RatLike) -> Dict[Tuple[int, Rational, Rational], Rational]:
        """Atoms with integer powers of the rational c_q absorbed.

        Returns {(h, rho, fractional exponent in [0,1)): rational}; two
        values coincide numerically for this c_q iff the grounded maps are
        equal (for fixed q the fractional exponents have denominator q).
        """
        cq = rat(cq)
        out: Dict[Tuple[int, Rational, Rational], Rational] = {}
        for (h, rho, e), c in self._atoms.items():
            fl = e.numerator // e.denominator
            frac = e - fl
            key = (h, rho, frac)
            v = c * cq**fl
            w = out.get(key)
            w = v if w is None else w + v
            if w:
                out[key] = w
            elif key in out:
                del out[key]
        return out

    def __repr__(self) -> str:
        if not self._atoms:
            return "0"
        parts = []
        for c, h, rho, e in self.atoms():
            bits = [str(c)]
            if h:
                bits.append(f"pi^({h}/2)")
            if rho != 1:
                bits.append(f"Gamma({rho})")
            if e:
                bits.append(f"cq^({e})")
            parts.append("*".join(bits))
        return " + ".join(parts)


@lru_cache(maxsize=None)
def _power_coeffs(coeffs: Tuple[Rational, ...], m: int) -> Tuple[Rational, ...]:
    """Coefficient vector of (sum_j coeffs[j] u^j) ** m."""
    if m == 0:
        return (rat(1),)
    prev = _power_coeffs(coeffs, m - 1)
    out = [rat(0)] * (len(prev) + len(coeffs) - 1)
    for i, a in enumerate(prev):
        if not a:
            continue
        for j, b in enumerate(coeffs):
            if b:
                out[i + j] += a * b
    return tuple(out)


def multinomial_D(m: int, l: int, potential: PotentialSpec) -> Rational:
    """Coefficient of u^l in (c_0 + c_1 u + ... + c_{q-1} u^{q-1})^m."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    q = potential.q
    if l < 0 or l > (q - 1) * m:
        raise ValueError(f"index l={l} out of range for m={m}, q={q}")
    coeffs = _power_coeffs(potential.lower_coeff_list(), m)
    return coeffs[l] if l < len(coeffs) else rat(0)


def H_poly(j: int, potential: PotentialSpec) -> List[Tuple[CoeffValue, Rational]]:
    """Expansion polynomial H_j as (value, s-exponent) pairs.

    H_j collects the t^(j/q) part of exp(-t * sum_{i<q} c_i (s/(t c_q))^(i/q));
    H_0 = 1 and for j >= 1

        H_j(s) = sum_p (-1)^p / p! * D^p_{pq-j} * (s/c_q)^((pq-j)/q)

    with p from ceil(j/q) to j.  The s-exponents are nonnegative rationals
    with denominator dividing q.
    """
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j == 0:
        return [(CoeffValue.rational(1), rat(0))]
    q = potential.q
    out: List[Tuple[CoeffValue, Rational]] = []
    for p in range(-(-j // q), j + 1):
        d = multinomial_D(p, p * q - j, potential)
        if not d:
            continue
        coef = Rational(-1 if p % 2 else 1, math.factorial(p)) * d
        s_exp = Rational(p * q - j, q)
        out.append((CoeffValue.atom(coef, cq_exp=-s_exp), s_exp))
    return out


def omega(diag_k: RadialPoly, gamma: int) -> Tuple[Rational, ...]:
    """Coefficients of r^0..r^gamma in a diagonal coefficient, zero padded."""
    if diag_k.degree() > gamma and not diag_k.is_zero():
        raise DegreeExceedsGammaError(
            f"diagonal degree {diag_k.degree()} exceeds gamma={gamma}"
        )
    return tuple(diag_k.coeff(l) for l in range(gamma + 1))


def T_coeff(
    n: int,
    k: int,
    p: int,
    potential: PotentialSpec,
    omegas: Sequence[Rational],
) -> CoeffValue:
    """Order-p term of the radial integral expansion for coefficient k.

    T_p = (1/q) sum_j sum_l (-1)^l / l! * Omega_{gamma-p+j} * D^l_{lq-j}
          * c_q^((p-gamma-lq)/q) * Gamma((n+gamma-p+lq)/q),

    where j runs over max(0, p-gamma)..p and l over ceil(j/q)..j (the j = 0
    term is the bare contribution with D^0_0 = 1).  Gamma arguments must be
    positive; a violation indicates an indexing bug.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    q = potential.q
    gamma = len(omegas) - 1
    total = CoeffValue.zero()
    inv_q = Rational(1, q)
    for j in range(max(0, p - gamma), p + 1):
        om = omegas[gamma - p + j]
        if not om:
            continue
        for l in range(-(-j // q), j + 1):
            d = multinomial_D(l, l * q - j, potential)
            if not d:
                continue
            coef = inv_q * om * d * Rational(-1 if l % 2 else 1, math.factorial(l))
            total = total + CoeffValue.atom(
                coef,
                gamma_arg=Rational(n + gamma - p + l * q, q),
                cq_exp=Rational(p - gamma - l * q, q),
            )
    return total


def _v_max(j: int, q: int) -> int:
    """Largest v with v*q - gamma_v <= j (the scan stops at the first violation)."""
    v = 0
    while (v + 1) * q - degree_bound(v + 1, q) <= j:
        v += 1
    return v


def required_depth(J: int, q: int) -> int:
    """Recursion depth needed to assemble coefficients a_0..a_J."""
    return 3 * (J // (q + 2)) + 2


def a_coeff(j: int, potential: PotentialSpec, parametrix: ParametrixSet) -> CoeffValue:
    """Expansion coefficient a_j = sum over v of the (j + gamma_v - v q)-th
    term of coefficient v's radial integral expansion."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    q = potential.q
    n = potential.dimension
    vmax = _v_max(j, q)
    if parametrix.depth < vmax:
        raise ValueError(
            f"insufficient parametrix depth {parametrix.depth} (need {vmax}) for a_{j}"
        )
    total = CoeffValue.zero()
    for v in range(vmax + 1):
        gamma = degree_bound(v, q)
        p = j + gamma - v * q
        if p < 0:
            continue
        total = total + T_coeff(n, v, p, potential, omega(parametrix.diag[v], gamma))
    return total


@dataclass(frozen=True)
class TraceExpansion:
    """Symbolic small-t expansion of the heat trace.

    value(t) ~ prefactor * t^leading_power * sum_j coefficients[j] * t^(j/q);
    remainder_power is the t exponent of the first omitted order.
    """

    potential: PotentialSpec
    order: int
    leading_power: Rational
    prefactor: CoeffValue
    coefficients: Dict[int, CoeffValue]
    remainder_power: Rational

    def combined_coefficient(self, j: int) -> CoeffValue:
        """Coefficient of t^(leading_power + j/q) with the prefactor folded in."""
        return self.coefficients[j].combine(self.prefactor)


def _expansion_prefactor(n: int, q: int) -> CoeffValue:
    g, h = gamma_half(n)
    return CoeffValue.atom(Rational(2, 2**n) / g, pi_half=-h, cq_exp=Rational(-n, q))


def _finish_expansion(
    potential: PotentialSpec, J: int, coeffs: Dict[int, CoeffValue]
) -> TraceExpansion:
    n, q = potential.dimension, potential.q
    for j in range(1, J + 1, 2):
        if not coeffs[j].is_zero():
            raise RuntimeError(
                f"internal inconsistency: a_{j} nonzero for an even potential"
            )
    leading = -Rational(n, 2) - Rational(n, q)
    return TraceExpansion(
        potential=potential,
        order=J,
        leading_power=leading,
        prefactor=_expansion_prefactor(n, q),
        coefficients=coeffs,
        remainder_power=leading + Rational(J + 1, q),
    )


def trace_expansion(potential: PotentialSpec, n: int, J: int) -> TraceExpansion:
    """Assemble the expansion through order t^(leading + J/q) coefficient by
    coefficient (each a_j from its own double sum)."""
    if n != potential.dimension:
        raise ValueError(f"n={n} does not match the potential's dimension {potential.dimension}")
    if J < 0:
        raise ValueError("J must be nonnegative")
    pset = build_parametrix(potential, required_depth(J, potential.q))
    coeffs = {j: a_coeff(j, potential, pset) for j in range(J + 1)}
    return _finish_expansion(potential, J, coeffs)


def series_assembly_direct(potential: PotentialSpec, n: int, J: int) -> TraceExpansion:
    """Assemble the same expansion by multiplying the radial series against
    the exponential-tail series and integrating termwise.

    Independent bookkeeping from ``trace_expansion``: the product is formed
    as a Cauchy product in powers of t^(1/q) and every s-monomial is
    integrated against s^(n/q - 1) e^(-s); the result must match
    ``trace_expansion`` atom for atom.
    """
    if n != potential.dimension:
        raise ValueError(f"n={n} does not match the potential's dimension {potential.dimension}")
    if J < 0:
        raise ValueError("J must be nonnegative")
    q = potential.q
    K = required_depth(J, q)
    pset = build_parametrix(potential, K)
    coeffs: Dict[int, CoeffValue] = {j: CoeffValue.zero() for j in range(J + 1)}
    inv_q = Rational(1, q)
    for k in range(K + 1):
        base = q * k
        if base > J + degree_bound(k, q):
            continue
        for l, om in sorted(pset.diag[k].coeffs.items()):
            if base - l > J:
                continue
            for jh in range(0, J - base + l + 1):
                target = base - l + jh
                if target < 0 or target > J:
                    continue
                for value, s_exp in H_poly(jh, potential):
                    for c, h, rho, e in value.atoms():
                        if rho != 1 or h != 0:  # H terms are rational * c_q^e
                            raise RuntimeError("unexpected H-series atom")
                        contrib = CoeffValue.atom(
                            inv_q * om * c,
                            gamma_arg=Rational(n + l, q) + s_exp,
                            cq_exp=e - Rational(l, q),
                        )
                        coeffs[target] = coeffs[target] + contrib
    return _finish_expansion(potential, J, coeffs)


def eval_expansion(exp: TraceExpansion, t: float) -> float:
    """Numeric value of the truncated expansion at t > 0.

    Atoms are summed in their canonical order and coefficients in
    increasing j, so the result is bit-for-bit deterministic.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    cq = exp.potential.cq
    q = exp.potential.q
    total = 0.0
    for j in range(exp.order + 1):
        aj = exp.coefficients[j]
        if aj.is_zero():
            continue
        total += aj.eval(cq) * t ** (j / q)
    return total * exp.prefactor.eval(cq) * t ** float(exp.leading_power)


def i_expansion(
    n: int, k: int, potential: PotentialSpec, diag_k: RadialPoly, order: int
) -> Tuple[Rational, CoeffValue, List[CoeffValue]]:
    """Truncated expansion of the radial integral for coefficient k.

    Returns (leading t power, prefactor, [T_0..T_order]) so that

        I(k, t) ~ prefactor * t^leading * sum_p T_p t^(p/q),

    with prefactor = S_n * c_q^(-n/q) and leading = -(n + gamma_k)/q.
    """
    q = potential.q
    gamma = degree_bound(k, q)
    omegas = omega(diag_k, gamma)
    sr, sh = sphere_area_constant(n)
    prefactor = CoeffValue.atom(sr, pi_half=sh, cq_exp=Rational(-n, q))
    terms = [T_coeff(n, k, p, potential, omegas) for p in range(order + 1)]
    return -Rational(n + gamma, q), prefactor, terms


def i_expansion_eval(
    n: int, k: int, potential: PotentialSpec, diag_k: RadialPoly, order: int, t: float
) -> float:
    """Numeric value of the truncated radial-integral expansion at t > 0."""
    if t <= 0:
        raise ValueError("t must be positive")
    lead, prefactor, terms = i_expansion(n, k, potential, diag_k, order)
    cq = potential.cq
    q = potential.q
    total = 0.0
    for p, term in enumerate(terms):
        if term.is_zero():
            continue
        total += term.eval(cq) * t ** (p / q)
    return total * prefactor.eval(cq) * t ** float(lead)
