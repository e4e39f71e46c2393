"""Exact sparse polynomial algebra over the rationals.

Polynomials live in the variables x1..xn, y1..yn, s (in that order).  A
monomial is a dense fixed-width exponent vector packed into a single
integer, ``EXP_BITS`` bits per variable, so multiplying monomials is one
integer addition and canonical equality is dict equality:

    MPoly.terms = {packed_exponents: coefficient, ...}

Coefficients are exact rationals (``gmpy2.mpq`` when available, else
``fractions.Fraction``); no operation ever rounds.  Zero coefficients are
never stored, so two polynomials are equal iff their term dicts are equal.

The module also provides the ray primitives the transport recursion needs:
substitution of x by the line y + s*(x - y), exact integration of s over
[0, 1], the coincidence limit y -> x, and reduction of rotation-invariant
polynomials to univariate polynomials in the radius r.
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

try:
    from gmpy2 import mpq as Rational
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as Rational

# Bits reserved per exponent field.  Per-variable degrees must stay below
# 2**EXP_BITS; callers that could exceed this (deep transport recursions)
# are guarded at their entry points.
EXP_BITS = 8
EXP_MASK = (1 << EXP_BITS) - 1

RatLike = Union[int, str, Rational]


def rat(value: RatLike, den: int | None = None) -> Rational:
    """Coerce ``value`` (int, "p/q" string, or rational) to an exact rational."""
    if den is not None:
        return Rational(value, den)
    return Rational(value)


class NotRadialError(ValueError):
    """Raised when a polynomial is not expressible in powers of x1^2+...+xn^2."""


class DimensionMismatchError(ValueError):
    """Raised when combining polynomials over different variable sets."""


def _width(n: int) -> int:
    return 2 * n + 1


def var_index(n: int, var: str) -> int:
    """Field index of variable ``var`` ("x1".."xn", "y1".."yn", or "s")."""
    if var == "s":
        return 2 * n
    kind, num = var[0], var[1:]
    if kind in ("x", "y") and num.isdigit():
        i = int(num)
        if 1 <= i <= n:
            return (i - 1) if kind == "x" else (n + i - 1)
    raise ValueError(f"unknown variable {var!r} for dimension {n}")


def _unpack(key: int, width: int) -> Tuple[int, ...]:
    return tuple((key >> (EXP_BITS * i)) & EXP_MASK for i in range(width))


class MPoly:
    """Exact multivariate polynomial in x1..xn, y1..yn, s.

    Instances are immutable by convention: no public operation mutates an
    existing polynomial, so values are safe to share between threads.
    """

    __slots__ = ("dimension", "terms")

    def __init__(self, dimension: int, terms: Mapping[int, Rational] | None = None):
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        self.dimension = dimension
        if terms:
            self.terms = {k: v for k, v in terms.items() if v}
        else:
            self.terms = {}

    @classmethod
    def zero(cls, n: int) -> "MPoly":
        return cls(n)

    @classmethod
    def const(cls, n: int, value: RatLike) -> "MPoly":
        c = rat(value)
        return cls(n, {0: c} if c else {})

    @classmethod
    def variable(cls, n: int, var: str) -> "MPoly":
        return cls(n, {1 << (EXP_BITS * var_index(n, var)): rat(1)})

    @classmethod
    def from_exponents(cls, n: int, entries: Iterable[Tuple[Sequence[int], RatLike]]) -> "MPoly":
        """Build a polynomial from (exponent vector, coefficient) pairs.

        Exponent vectors list degrees for x1..xn, y1..yn, s; a short vector
        is padded with zeros on the right.
        """
        width = _width(n)
        terms: Dict[int, Rational] = {}
        for exps, coeff in entries:
            exps = list(exps)
            if len(exps) > width:
                raise ValueError("exponent vector longer than variable list")
            exps += [0] * (width - len(exps))
            key = 0
            for i, e in enumerate(exps):
                if not 0 <= e <= EXP_MASK:
                    raise ValueError(f"exponent {e} out of range")
                key |= e << (EXP_BITS * i)
            c = rat(coeff)
            if c:
                terms[key] = terms.get(key, rat(0)) + c
        return cls(n, terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MPoly):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    def __hash__(self):  # pragma: no cover - polynomials are not dict keys
        return hash((self.dimension, frozenset(self.terms.items())))

    def __add__(self, other: "MPoly") -> "MPoly":
        return poly_arith(self, other, "add")

    def __sub__(self, other: "MPoly") -> "MPoly":
        return poly_arith(self, other, "sub")

    def __mul__(self, other: "MPoly") -> "MPoly":
        return poly_arith(self, other, "mul")

    def __neg__(self) -> "MPoly":
        return MPoly(self.dimension, {k: -v for k, v in self.terms.items()})

    def scale(self, c: RatLike) -> "MPoly":
        c = rat(c)
        if not c:
            return MPoly(self.dimension)
        return MPoly(self.dimension, {k: v * c for k, v in self.terms.items()})

    def total_degree(self) -> int:
        """Total degree across all variables (0 for the zero polynomial)."""
        width = _width(self.dimension)
        best = 0
        for key in self.terms:
            d = 0
            while key:
                d += key & EXP_MASK
                key >>= EXP_BITS
            if d > best:
                best = d
        return best

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        n, width = self.dimension, _width(self.dimension)
        names = [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)] + ["s"]
        parts = []
        for key in sorted(self.terms):
            exps = _unpack(key, width)
            mono = "*".join(
                f"{names[i]}^{e}" if e > 1 else names[i] for i, e in enumerate(exps) if e
            )
            c = self.terms[key]
            parts.append(f"{c}" if not mono else f"{c}*{mono}")
        return " + ".join(parts)


def _check_same_dimension(a: MPoly, b: MPoly) -> None:
    if a.dimension != b.dimension:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )


def _max_fields(p: MPoly) -> Tuple[int, ...]:
    width = _width(p.dimension)
    maxes = [0] * width
    for key in p.terms:
        for i in range(width):
            e = (key >> (EXP_BITS * i)) & EXP_MASK
            if e > maxes[i]:
                maxes[i] = e
    return tuple(maxes)


def poly_arith(a: MPoly, b: MPoly, op: str) -> MPoly:
    """Exact ring operation on two polynomials: add, sub, mul, or scale.

    For "scale" the second operand must be a constant polynomial (the
    rational-factor form is ``MPoly.scale``).  Raises on dimension
    mismatch; the result is always in canonical form.
    """
    _check_same_dimension(a, b)
    n = a.dimension
    if op == "scale":
        if any(k != 0 for k in b.terms):
            raise ValueError("scale requires a constant second operand")
        return a.scale(b.terms.get(0, rat(0)))
    if op == "add" or op == "sub":
        out = dict(a.terms)
        sign = 1 if op == "add" else -1
        for k, v in b.terms.items():
            w = out.get(k)
            nv = v if sign > 0 else -v
            if w is None:
                out[k] = nv
            else:
                w = w + nv
                if w:
                    out[k] = w
                else:
                    del out[k]
        res = MPoly(n)
        res.terms = out
        return res
    if op == "mul":
        if not a.terms or not b.terms:
            return MPoly(n)
        for ea, eb in zip(_max_fields(a), _max_fields(b)):
            if ea + eb > EXP_MASK:
                raise OverflowError(
                    "per-variable degree of product exceeds packed exponent range"
                )
        small, large = (a.terms, b.terms) if len(a.terms) <= len(b.terms) else (b.terms, a.terms)
        large_items = list(large.items())
        out: Dict[int, Rational] = {}
        get = out.get
        for ka, ca in small.items():
            for kb, cb in large_items:
                k = ka + kb
                w = get(k)
                if w is None:
                    out[k] = ca * cb
                else:
                    out[k] = w + ca * cb
        res = MPoly(n)
        res.terms = {k: v for k, v in out.items() if v}
        return res
    raise ValueError(f"unknown op {op!r}")


def poly_diff(p: MPoly, var: str) -> MPoly:
    """Exact partial derivative of ``p`` with respect to one variable."""
    shift = EXP_BITS * var_index(p.dimension, var)
    out: Dict[int, Rational] = {}
    for key, c in p.terms.items():
        e = (key >> shift) & EXP_MASK
        if e:
            k = key - (1 << shift)
            w = out.get(k)
            out[k] = c * e if w is None else w + c * e
    res = MPoly(p.dimension)
    res.terms = {k: v for k, v in out.items() if v}
    return res


def laplacian_x(p: MPoly) -> MPoly:
    """Sum of second derivatives with respect to x1..xn."""
    n = p.dimension
    out: Dict[int, Rational] = {}
    for i in range(n):
        shift = EXP_BITS * i
        for key, c in p.terms.items():
            e = (key >> shift) & EXP_MASK
            if e >= 2:
                k = key - (2 << shift)
                w = out.get(k)
                v = c * (e * (e - 1))
                out[k] = v if w is None else w + v
    res = MPoly(n)
    res.terms = {k: v for k, v in out.items() if v}
    return res


def _require_no_s(p: MPoly, context: str) -> int:
    s_shift = EXP_BITS * (2 * p.dimension)
    for key in p.terms:
        if key >> s_shift:
            raise ValueError(f"{context}: polynomial already contains s")
    return s_shift


# Per-exponent expansion of ((1-s)*y + s*x)**a as [(m, a-m, s_exp, int coeff)].
_LINE_EXPANSIONS: Dict[int, list] = {}


def _line_expansion(a: int) -> list:
    exp = _LINE_EXPANSIONS.get(a)
    if exp is None:
        exp = []
        for m in range(a + 1):
            cm = math.comb(a, m)
            for j in range(a - m + 1):
                coeff = cm * math.comb(a - m, j)
                exp.append((m, a - m, m + j, -coeff if j & 1 else coeff))
        _LINE_EXPANSIONS[a] = exp
    return exp


def substitute_line(p: MPoly) -> MPoly:
    """Replace every x_i by y_i + s*(x_i - y_i), expanding exactly.

    ``p`` must not contain s (the substitution introduces it).
    """
    s_shift = _require_no_s(p, "substitute_line")
    n = p.dimension
    maxes = _max_fields(p)
    for i in range(n):
        if maxes[i] + maxes[n + i] > EXP_MASK or sum(maxes[:n]) > EXP_MASK:
            raise OverflowError("degrees too large for packed line substitution")
    terms = p.terms
    for i in range(n):
        shift = EXP_BITS * i
        y_shift = EXP_BITS * (n + i)
        out: Dict[int, Rational] = {}
        get = out.get
        for key, c in terms.items():
            a = (key >> shift) & EXP_MASK
            if a == 0:
                w = get(key)
                out[key] = c if w is None else w + c
                continue
            base = key - (a << shift)
            for m, ym, se, ic in _line_expansion(a):
                k = base + (m << shift) + (ym << y_shift) + (se << s_shift)
                w = get(k)
                v = c * ic
                out[k] = v if w is None else w + v
        terms = {k: v for k, v in out.items() if v}
    res = MPoly(n)
    res.terms = terms
    return res


def eval_s(p: MPoly, value: RatLike) -> MPoly:
    """Substitute the rational ``value`` for s."""
    n = p.dimension
    s_shift = EXP_BITS * (2 * n)
    v = rat(value)
    powers = {0: rat(1)}
    out: Dict[int, Rational] = {}
    get = out.get
    for key, c in p.terms.items():
        e = key >> s_shift
        pw = powers.get(e)
        if pw is None:
            pw = v**e
            powers[e] = pw
        k = key - (e << s_shift)
        cv = c * pw
        w = get(k)
        out[k] = cv if w is None else w + cv
    res = MPoly(n)
    res.terms = {k: v for k, v in out.items() if v}
    return res


def integrate_s_unit(p: MPoly) -> MPoly:
    """Exact definite integral of ``p`` over s in [0, 1]; the result has no s."""
    n = p.dimension
    s_shift = EXP_BITS * (2 * n)
    out: Dict[int, Rational] = {}
    get = out.get
    inv: Dict[int, Rational] = {}
    for key, c in p.terms.items():
        e = key >> s_shift
        f = inv.get(e)
        if f is None:
            f = Rational(1, e + 1)
            inv[e] = f
        k = key - (e << s_shift)
        cv = c * f
        w = get(k)
        out[k] = cv if w is None else w + cv
    res = MPoly(n)
    res.terms = {k: v for k, v in out.items() if v}
    return res


def mul_s_power(p: MPoly, k: int) -> MPoly:
    """Multiply by s**k."""
    if k < 0:
        raise ValueError("s power must be nonnegative")
    if k == 0:
        return p
    s_shift = EXP_BITS * (2 * p.dimension)
    res = MPoly(p.dimension)
    res.terms = {key + (k << s_shift): c for key, c in p.terms.items()}
    return res


# Per-x-part expansions for the fused ray transform, keyed by dimension and
# then by packed x exponents: [(delta_key, total m, integer binomial product)].
# The cache is flushed wholesale once it holds too many expansion entries.
_RAY_EXPANSIONS: Dict[int, Dict[int, tuple]] = {}
_RAY_CACHE_ENTRIES = 0
_RAY_CACHE_LIMIT = 4_000_000


def clear_expansion_caches() -> None:
    """Drop memoized monomial expansions (memory control for long runs)."""
    global _RAY_CACHE_ENTRIES
    _RAY_EXPANSIONS.clear()
    _RAY_CACHE_ENTRIES = 0
    _RSQ_POWERS.clear()
    _LINE_EXPANSIONS.clear()


def _ray_expansion(n: int, xkey: int) -> tuple:
    alphas = [(xkey >> (EXP_BITS * i)) & EXP_MASK for i in range(n)]
    exp = [(0, 0, 1)]
    for i, a in enumerate(alphas):
        if a == 0:
            continue
        x_shift = EXP_BITS * i
        y_shift = EXP_BITS * (n + i)
        nxt = []
        for m in range(a + 1):
            piece = (m << x_shift) + ((a - m) << y_shift)
            cm = math.comb(a, m)
            for dkey, tm, bc in exp:
                nxt.append((dkey + piece, tm + m, bc * cm))
        exp = nxt
    return tuple(exp)


def line_integral_transform(p: MPoly, k: int) -> MPoly:
    """Exact value of integral over s in [0,1] of s**k * p(y + s*(x-y), y).

    Equivalent to integrate_s_unit(mul_s_power(substitute_line(p), k)) but
    fuses the three steps: along the ray each monomial splits into binomial
    pieces whose s integrals are Beta values (k+M)! L! / (k+M+L+1)!, so no
    s-carrying intermediate polynomial is ever built.
    """
    if k < 0:
        raise ValueError("s power must be nonnegative")
    _require_no_s(p, "line_integral_transform")
    n = p.dimension
    xmask = (1 << (EXP_BITS * n)) - 1
    out: Dict[int, Rational] = {}
    get = out.get
    expansions = _RAY_EXPANSIONS.setdefault(n, {})
    exp_get = expansions.get
    # beta_cache[|alpha|][M] = (k+M)! (|alpha|-M)! / (k+|alpha|+1)!
    beta_cache: Dict[int, list] = {}
    for key, c in p.terms.items():
        xkey = key & xmask
        if xkey == 0:
            cv = c * Rational(1, k + 1)
            w = get(key)
            out[key] = cv if w is None else w + cv
            continue
        expansion = exp_get(xkey)
        if expansion is None:
            expansion = _ray_expansion(n, xkey)
            global _RAY_CACHE_ENTRIES
            if _RAY_CACHE_ENTRIES > _RAY_CACHE_LIMIT:
                clear_expansion_caches()
                expansions = _RAY_EXPANSIONS.setdefault(n, {})
                exp_get = expansions.get
            expansions[xkey] = expansion
            _RAY_CACHE_ENTRIES += len(expansion)
        # total x-degree of this term
        deg = 0
        t = xkey
        while t:
            deg += t & EXP_MASK
            t >>= EXP_BITS
        betas = beta_cache.get(deg)
        if betas is None:
            denom = math.factorial(k + deg + 1)
            betas = [
                Rational(math.factorial(k + m) * math.factorial(deg - m), denom)
                for m in range(deg + 1)
            ]
            beta_cache[deg] = betas
        base = key - xkey
        # fold the term coefficient into the Beta weights once per term
        folded = [c * b for b in betas]
        for dkey, tm, bc in expansion:
            v = folded[tm] * bc
            kk = base + dkey
            w = get(kk)
            out[kk] = v if w is None else w + v
    res = MPoly(n)
    res.terms = {kk: v for kk, v in out.items() if v}
    return res


def coincidence_limit(p: MPoly) -> MPoly:
    """Set y_i = x_i for every i.  ``p`` must contain no s."""
    n = p.dimension
    s_shift = EXP_BITS * (2 * n)
    for key in p.terms:
        if key >> s_shift:
            raise ValueError("coincidence_limit: residual s present")
    ymask_width = EXP_BITS * n
    xmask = (1 << ymask_width) - 1
    out: Dict[int, Rational] = {}
    get = out.get
    for key, c in p.terms.items():
        xpart = key & xmask
        ypart = (key >> ymask_width) & xmask
        k = xpart + ypart  # same field layout, shifted into x fields
        w = get(k)
        out[k] = c if w is None else w + c
    res = MPoly(n)
    res.terms = {k: v for k, v in out.items() if v}
    return res


class RadialPoly:
    """Exact univariate polynomial in the radius r.

    Stored as {degree: coefficient} with no zero coefficients, so equality
    is dict equality and the degree is available in O(1) from the key set.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[int, RatLike] | None = None):
        self.coeffs: Dict[int, Rational] = {}
        if coeffs:
            for d, c in coeffs.items():
                c = rat(c)
                if c:
                    if d < 0:
                        raise ValueError("negative degree in RadialPoly")
                    self.coeffs[int(d)] = c

    @classmethod
    def zero(cls) -> "RadialPoly":
        return cls()

    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        """Degree of the polynomial (0 for the zero polynomial)."""
        return max(self.coeffs) if self.coeffs else 0

    def coeff(self, d: int) -> Rational:
        return self.coeffs.get(d, rat(0))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RadialPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):  # pragma: no cover
        return hash(frozenset(self.coeffs.items()))

    def eval_exact(self, r: RatLike) -> Rational:
        r = rat(r)
        total = rat(0)
        for d, c in self.coeffs.items():
            total += c * r**d
        return total

    def eval_float(self, r: float) -> float:
        total = 0.0
        for d in sorted(self.coeffs):
            total += float(self.coeffs[d]) * r**d
        return total

    def as_mpoly(self, n: int) -> MPoly:
        """Expand r**d into (x1^2+...+xn^2)^(d/2); requires even degrees."""
        out = MPoly.const(n, 0)
        for d, c in sorted(self.coeffs.items()):
            if d % 2:
                raise ValueError("odd power of r has no polynomial extension")
            out = out + _rsq_power(n, d // 2).scale(c)
        return out

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for d in sorted(self.coeffs):
            c = self.coeffs[d]
            parts.append(f"{c}" if d == 0 else (f"{c}*r^{d}" if d > 1 else f"{c}*r"))
        return " + ".join(parts)


_RSQ_POWERS: Dict[Tuple[int, int], MPoly] = {}


def _rsq_power(n: int, m: int) -> MPoly:
    """(x1^2 + ... + xn^2)**m, cached."""
    p = _RSQ_POWERS.get((n, m))
    if p is None:
        if m == 0:
            p = MPoly.const(n, 1)
        else:
            rsq = MPoly.from_exponents(
                n, [([0] * i + [2], 1) for i in range(n)]
            )
            p = _rsq_power(n, m - 1) * rsq
        _RSQ_POWERS[(n, m)] = p
    return p


def radial_reduce(p: MPoly) -> RadialPoly:
    """Write a rotation-invariant polynomial of x as a polynomial in r.

    Works by iterated exact division of the top homogeneous component by
    (x1^2+...+xn^2); any nonzero remainder means ``p`` is not a polynomial
    in the squared radius and NotRadialError is raised.  ``p`` must depend
    only on the x variables.
    """
    n = p.dimension
    xmask = (1 << (EXP_BITS * n)) - 1
    for key in p.terms:
        if key >> (EXP_BITS * n):
            raise NotRadialError("polynomial depends on y or s variables")
    coeffs: Dict[int, Rational] = {}
    rem = p
    while rem.terms:
        deg = rem.total_degree()
        if deg == 0:
            coeffs[0] = rem.terms[0]
            break
        if deg % 2:
            raise NotRadialError(f"odd-degree component of degree {deg}")
        # If rem = c*r^deg + lower, the x1^deg coefficient of the top
        # component must be c because (x.x)^(deg/2) has x1^deg coefficient 1.
        lead_key = deg  # exponent deg in field 0
        c = rem.terms.get(lead_key)
        if c is None:
            raise NotRadialError(f"degree-{deg} component lacks the x1^{deg} monomial")
        rem = rem - _rsq_power(n, deg // 2).scale(c)
        if rem.total_degree() >= deg and rem.terms:
            raise NotRadialError(f"degree-{deg} component is not radially symmetric")
        coeffs[deg] = c
    return RadialPoly(coeffs)


def evaluate(p: MPoly, xs: Sequence[RatLike], ys: Sequence[RatLike] = (), s: RatLike = 0) -> Rational:
    """Exact evaluation of ``p`` at rational x, y, s values.

    Missing y values default to 0, as does s.
    """
    n = p.dimension
    width = _width(n)
    vals = [rat(v) for v in xs] + [rat(v) for v in ys]
    if len(vals) < 2 * n:
        vals += [rat(0)] * (2 * n - len(vals))
    vals.append(rat(s))
    if len(vals) != width:
        raise ValueError("wrong number of coordinates")
    pow_cache: list[Dict[int, Rational]] = [{0: rat(1)} for _ in range(width)]
    total = rat(0)
    for key, c in p.terms.items():
        term = c
        for i in range(width):
            e = (key >> (EXP_BITS * i)) & EXP_MASK
            if e:
                cache = pow_cache[i]
                pw = cache.get(e)
                if pw is None:
                    pw = vals[i] ** e
                    cache[e] = pw
                term = term * pw
        total += term
    return total
