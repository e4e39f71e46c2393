"""Transport-equation recursion for the resummed heat-kernel coefficients.

For H = -Laplacian + V(|x|) with a radial polynomial potential, the small-t
kernel ansatz exp(-(x-y)^2/(4t) - t*V) * sum_k t^k A_k(x, y) turns the heat
equation into a chain of first-order transport equations along the ray
x(s) = y + s*(x - y):

    ((x-y).grad + k + 1) A_{k+1} = q_k,

so each A_{k+1} is the exact ray integral of s^k q_k(x(s), y).  The
right-hand side q_k mixes A_k, A_{k-1}, A_{k-2} with derivatives of V; all
of it stays inside exact rational polynomial arithmetic.  On the diagonal
y = x each A_k collapses to a univariate polynomial in r = |x|.
"""

from __future__ import annotations

import os
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

from .exactalg import (
    EXP_MASK,
    MPoly,
    RadialPoly,
    Rational,
    RatLike,
    coincidence_limit,
    integrate_s_unit,
    laplacian_x,
    line_integral_transform,
    poly_diff,
    radial_reduce,
    rat,
    substitute_line,
)

DEFAULT_MAX_DEPTH = 12
_MAX_DEPTH_ENV = "HEATTRACE_MAX_K"


def max_depth_limit() -> int:
    """Depth cap for the recursion, overridable via HEATTRACE_MAX_K."""
    raw = os.environ.get(_MAX_DEPTH_ENV)
    if raw is None:
        return DEFAULT_MAX_DEPTH
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{_MAX_DEPTH_ENV} must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ValueError(f"{_MAX_DEPTH_ENV} must be nonnegative")
    return value


def degree_bound(k: int, q: int) -> int:
    """Largest power of r that can appear in the diagonal coefficient A_k.

    Zero for k <= 1; for k >= 2 it is floor(2k/3)*(q+2) - 2k, which follows
    from counting potential factors against derivative factors in A_k.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if q < 2:
        raise ValueError("q must be at least 2")
    if k <= 1:
        return 0
    return (2 * k // 3) * (q + 2) - 2 * k


@dataclass(frozen=True)
class PotentialSpec:
    """Radial polynomial potential V(r) = sum_j c_j r^j on R^dimension.

    Only even degrees are allowed (odd powers of r are not smooth at the
    origin), the top coefficient must be positive so V grows at infinity,
    and c_0 must be nonnegative.  Instances are immutable and hashable.
    """

    dimension: int
    coeffs: Tuple[Tuple[int, Rational], ...]

    @classmethod
    def from_coeffs(cls, dimension: int, coeffs: Mapping[int, RatLike]) -> "PotentialSpec":
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        cleaned: Dict[int, Rational] = {}
        for deg, c in coeffs.items():
            c = rat(c)
            if not c:
                continue
            if deg < 0:
                raise ValueError("negative powers of r are not allowed")
            if deg % 2:
                raise ValueError(f"odd power r^{deg} rejected: V(|x|) must be smooth")
            cleaned[int(deg)] = c
        if not cleaned or max(cleaned) < 2:
            raise ValueError("potential must contain a term of degree q >= 2")
        q = max(cleaned)
        if cleaned[q] <= 0:
            raise ValueError("leading coefficient c_q must be positive")
        if cleaned.get(0, rat(0)) < 0:
            raise ValueError("constant term c_0 must be nonnegative")
        spec = cls(dimension, tuple(sorted(cleaned.items())))
        spec._warn_if_negative()
        return spec

    @property
    def q(self) -> int:
        return self.coeffs[-1][0]

    @property
    def cq(self) -> Rational:
        return self.coeffs[-1][1]

    def coefficient(self, degree: int) -> Rational:
        for d, c in self.coeffs:
            if d == degree:
                return c
        return rat(0)

    def lower_coeff_list(self) -> Tuple[Rational, ...]:
        """Coefficients (c_0, ..., c_{q-1}) of the sub-leading part of V."""
        out = [rat(0)] * self.q
        for d, c in self.coeffs:
            if d < self.q:
                out[d] = c
        return tuple(out)

    def radial(self) -> RadialPoly:
        return RadialPoly(dict(self.coeffs))

    def as_mpoly(self) -> MPoly:
        """V as an exact polynomial in the x variables."""
        return self.radial().as_mpoly(self.dimension)

    def eval_float(self, r: float) -> float:
        return self.radial().eval_float(r)

    def _warn_if_negative(self) -> None:
        # Positivity of inf V is only needed for the trace interpretation,
        # not for the expansion algebra, so a violation is a warning.
        cs = [(d, float(c)) for d, c in self.coeffs]
        q, cq = cs[-1]
        bound = 1.0 + max((abs(c) / cq) ** (1.0 / (q - d)) for d, c in cs[:-1]) if len(cs) > 1 else 1.0
        lo = min(
            sum(c * (bound * i / 512.0) ** d for d, c in cs) for i in range(513)
        )
        if lo < 0:
            warnings.warn(
                f"potential attains negative values (min sampled {lo:.6g}); "
                "the heat trace may not be well defined",
                UserWarning,
                stacklevel=3,
            )

    def __str__(self) -> str:
        parts = []
        for d, c in self.coeffs:
            if d == 0:
                parts.append(f"{c}")
            else:
                parts.append(f"{c}*r^{d}")
        return " + ".join(parts)


class ParametrixSet:
    """Coefficients A_0..A_K of one potential's transport recursion.

    ``offdiag[k]`` is A_k(x, y); ``diag[k]`` is its value at y = x written
    as a polynomial in r.  When built with ``keep_rhs=True``, ``rhs[k]``
    is the transport right-hand side that A_{k+1} solves against.
    """

    __slots__ = ("potential", "offdiag", "diag", "rhs")

    def __init__(self, potential, offdiag, diag, rhs=None):
        self.potential: PotentialSpec = potential
        self.offdiag: Tuple[MPoly, ...] = tuple(offdiag)
        self.diag: Tuple[RadialPoly, ...] = tuple(diag)
        self.rhs: Tuple[MPoly, ...] | None = None if rhs is None else tuple(rhs)

    @property
    def depth(self) -> int:
        return len(self.offdiag) - 1


# Derived polynomial data per potential: V, grad V, lap V, (grad V)^2 and
# the drift (x-y).grad V.  Cached because every recursion step reuses them.
_DERIVED_CACHE: "OrderedDict[PotentialSpec, dict]" = OrderedDict()
_DERIVED_CACHE_MAX = 32


def _derived(potential: PotentialSpec) -> dict:
    data = _DERIVED_CACHE.get(potential)
    if data is not None:
        _DERIVED_CACHE.move_to_end(potential)
        return data
    n = potential.dimension
    v = potential.as_mpoly()
    grad = tuple(poly_diff(v, f"x{i}") for i in range(1, n + 1))
    lap = laplacian_x(v)
    gradsq = MPoly.zero(n)
    for g in grad:
        gradsq = gradsq + g * g
    drift = MPoly.zero(n)
    for i, g in enumerate(grad, start=1):
        xi = MPoly.variable(n, f"x{i}")
        yi = MPoly.variable(n, f"y{i}")
        drift = drift + (xi - yi) * g
    data = {"v": v, "grad": grad, "lap": lap, "gradsq": gradsq, "drift": drift}
    _DERIVED_CACHE[potential] = data
    while len(_DERIVED_CACHE) > _DERIVED_CACHE_MAX:
        _DERIVED_CACHE.popitem(last=False)
    return data


def transport_rhs(k: int, pset: ParametrixSet) -> MPoly:
    """Right-hand side q_k of the transport equation that A_{k+1} solves.

    q_k = A_k (x-y).grad V + lap A_k - A_{k-1} lap V
          - 2 grad V . grad A_{k-1} + A_{k-2} (grad V)^2,

    with gradients in x.  Valid for k >= 1 (the k - 2 term is absent at
    k = 1); requires A_k, A_{k-1} (and A_{k-2} for k >= 2) to be present.
    """
    if k < 1:
        raise ValueError("transport_rhs is defined for k >= 1")
    if len(pset.offdiag) <= k:
        raise ValueError(f"insufficient prior coefficients for k={k}")
    d = _derived(pset.potential)
    n = pset.potential.dimension
    a_k = pset.offdiag[k]
    a_km1 = pset.offdiag[k - 1]
    out = a_k * d["drift"] + laplacian_x(a_k) - a_km1 * d["lap"]
    cross = MPoly.zero(n)
    for i, g in enumerate(d["grad"], start=1):
        cross = cross + g * poly_diff(a_km1, f"x{i}")
    out = out - cross.scale(2)
    if k >= 2:
        out = out + pset.offdiag[k - 2] * d["gradsq"]
    return out


def transport_solve(k: int, rhs: MPoly) -> MPoly:
    """Solve ((x-y).grad + k + 1) A = rhs for A.

    The solution is the ray integral over s in [0,1] of s^k rhs(x(s), y)
    with x(s) = y + s*(x - y); substituting it back into the left side
    reproduces ``rhs`` exactly.  ``rhs`` must not contain s.
    """
    return line_integral_transform(rhs, k)


_BUILD_CACHE: "OrderedDict[PotentialSpec, Tuple[list, list]]" = OrderedDict()
_BUILD_CACHE_MAX = 6


def _check_depth_supported(potential: PotentialSpec, K: int) -> None:
    cap = max_depth_limit()
    if K > cap:
        raise ValueError(
            f"requested depth K={K} exceeds the cap {cap}; "
            f"raise {_MAX_DEPTH_ENV} if you really need this"
        )
    # packed exponent fields must hold every intermediate degree
    worst = potential.q * (K + 1) + 2 * potential.q + 4
    if worst > EXP_MASK:
        raise ValueError(
            f"degree q*K too large for the packed exponent width ({worst} > {EXP_MASK})"
        )


def build_parametrix(potential: PotentialSpec, K: int, keep_rhs: bool = False) -> ParametrixSet:
    """Compute A_0..A_K (off-diagonal and diagonal) for ``potential``.

    A_0 = 1; A_1 = V(x) - integral of V along the ray; each later
    coefficient solves its transport equation against the previous two or
    three.  Results for a potential are cached and extended in place, so
    repeated calls at increasing K only pay for the new levels.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    _check_depth_supported(potential, K)
    n = potential.dimension

    cached = _BUILD_CACHE.get(potential)
    if cached is not None:
        _BUILD_CACHE.move_to_end(potential)
        offdiag, diag = cached
    else:
        offdiag, diag = [MPoly.const(n, 1)], [radial_reduce(MPoly.const(n, 1))]
        _BUILD_CACHE[potential] = (offdiag, diag)
        while len(_BUILD_CACHE) > _BUILD_CACHE_MAX:
            _BUILD_CACHE.popitem(last=False)

    new_rhs: Dict[int, MPoly] = {}
    if len(offdiag) <= K:
        d = _derived(potential)
        while len(offdiag) <= K:
            k = len(offdiag)
            if k == 1:
                a_k = d["v"] - integrate_s_unit(substitute_line(d["v"]))
            else:
                q_km1 = transport_rhs(k - 1, ParametrixSet(potential, offdiag, diag))
                if keep_rhs:
                    new_rhs[k - 1] = q_km1
                a_k = transport_solve(k - 1, q_km1)
            offdiag.append(a_k)
            diag_k = radial_reduce(coincidence_limit(a_k))
            if diag_k.degree() > degree_bound(k, potential.q):
                raise RuntimeError(
                    f"internal inconsistency: deg A_{k}(r) = {diag_k.degree()} exceeds "
                    f"the bound {degree_bound(k, potential.q)}"
                )
            if k == 1 and not diag_k.is_zero():
                raise RuntimeError("internal inconsistency: A_1(r) must vanish")
            diag.append(diag_k)

    rhs = None
    if keep_rhs:
        pset_full = ParametrixSet(potential, offdiag[: K + 1], diag[: K + 1])
        rhs = [_derived(potential)["drift"]]
        for k in range(1, K):
            rhs.append(new_rhs[k] if k in new_rhs else transport_rhs(k, pset_full))
    return ParametrixSet(potential, offdiag[: K + 1], diag[: K + 1], rhs)


def clear_caches() -> None:
    """Drop memoized parametrix data (mainly for tests and memory control)."""
    from .exactalg import clear_expansion_caches

    _BUILD_CACHE.clear()
    _DERIVED_CACHE.clear()
    clear_expansion_caches()


def diag_closed_forms(potential: PotentialSpec) -> list[RadialPoly]:
    """Diagonal coefficients A_0..A_4 from their published closed forms.

    Independent of the transport recursion (used to cross-check it):
    A_2 = -lap V / 6,
    A_3 = -lap^2 V / 60 + |grad V|^2 / 12,
    A_4 = -lap^3 V / 840 + (lap V)^2 / 72 + |hess V|^2 / 90
          + grad V . grad lap V / 30.
    """
    n = potential.dimension
    v = potential.as_mpoly()
    lap1 = laplacian_x(v)
    lap2 = laplacian_x(lap1)
    lap3 = laplacian_x(lap2)
    grad = [poly_diff(v, f"x{i}") for i in range(1, n + 1)]
    gradsq = MPoly.zero(n)
    for g in grad:
        gradsq = gradsq + g * g
    hesssq = MPoly.zero(n)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            hij = poly_diff(grad[i - 1], f"x{j}")
            hesssq = hesssq + hij * hij
    gradlap = MPoly.zero(n)
    for i in range(1, n + 1):
        gradlap = gradlap + grad[i - 1] * poly_diff(lap1, f"x{i}")

    a2 = lap1.scale(rat(-1, 6))
    a3 = lap2.scale(rat(-1, 60)) + gradsq.scale(rat(1, 12))
    a4 = (
        lap3.scale(rat(-1, 840))
        + (lap1 * lap1).scale(rat(1, 72))
        + hesssq.scale(rat(1, 90))
        + gradlap.scale(rat(1, 30))
    )
    one = radial_reduce(MPoly.const(n, 1))
    return [one, RadialPoly(), radial_reduce(a2), radial_reduce(a3), radial_reduce(a4)]
