"""Independent ground-truth engines for the trace expansion.

Three oracles that never touch the transport/assembly code paths:

* the closed-form harmonic trace [2 sinh(sqrt(c) t)]^(-d) and its exact
  Laurent expansion around t = 0,
* adaptive quadrature of the radial integrals S_n * int r^(n-1) A_k(r)
  exp(-t V(r)) dr,
* a finite-difference realization of Tr exp(-tH) = sum_i exp(-t lambda_i)
  on a truncated domain (dimensions 1 and 3).

A scaling probe estimates the observed remainder order of a truncated
expansion from the decay of oracle-vs-expansion differences.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .assembly import TraceExpansion, eval_expansion, sphere_area_constant
from .exactalg import RadialPoly, Rational, RatLike, rat
from .parametrix import PotentialSpec


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its error target."""


class SpectralError(RuntimeError):
    """The finite-difference trace could not be computed reliably."""


@dataclass(frozen=True)
class LaurentSeries:
    """Exact truncated Laurent expansion of the harmonic trace.

    ``coeffs[p]`` is a rational r_p meaning r_p * c^(p/2) at t^p; powers run
    from -dimension up to ``order`` inclusive (only every other power is
    present because the closed form is a series in t^2 times t^-d).
    """

    dimension: int
    coupling: Rational
    coeffs: Dict[int, Rational]
    order: int

    def coeff(self, p: int) -> Rational:
        return self.coeffs.get(p, rat(0))

    def eval(self, t: float) -> float:
        c = float(self.coupling)
        total = 0.0
        for p in sorted(self.coeffs):
            total += float(self.coeffs[p]) * c ** (p / 2.0) * t**p
        return total


def _series_reciprocal(g: List[Rational], m: int) -> List[Rational]:
    """First m+1 coefficients of 1/g for a series with g[0] = 1."""
    inv = [rat(1)] + [rat(0)] * m
    for i in range(1, m + 1):
        acc = rat(0)
        for j in range(1, min(i, len(g) - 1) + 1):
            acc += g[j] * inv[i - j]
        inv[i] = -acc
    return inv


def harmonic_trace_series(d: int, c: RatLike, order: int) -> LaurentSeries:
    """Exact Laurent coefficients of [2 sinh(sqrt(c) t)]^(-d) through t^order.

    Computed from the exact power series of (sinh(u)/u)^(-d) in w = u^2:
    the coefficient of t^(-d+2m) is 2^(-d) * (reciprocal power)_m, carrying
    c^((-d+2m)/2) symbolically.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if order < -d:
        raise ValueError("order below the leading power")
    c = rat(c)
    if c <= 0:
        raise ValueError("coupling must be positive")
    m_max = (order + d) // 2
    g = [Rational(1, math.factorial(2 * m + 1)) for m in range(m_max + 1)]
    inv = _series_reciprocal(g, m_max)
    # (1/g)^d by repeated truncated multiplication
    power = [rat(1)] + [rat(0)] * m_max
    for _ in range(d):
        nxt = [rat(0)] * (m_max + 1)
        for i, a in enumerate(power):
            if not a:
                continue
            for j in range(m_max + 1 - i):
                b = inv[j]
                if b:
                    nxt[i + j] += a * b
        power = nxt
    half = Rational(1, 2**d)
    coeffs = {-d + 2 * m: half * power[m] for m in range(m_max + 1) if power[m]}
    return LaurentSeries(dimension=d, coupling=c, coeffs=coeffs, order=order)


def harmonic_trace_eval(d: int, c: RatLike | float, t: float) -> float:
    """Closed-form harmonic trace [2 sinh(sqrt(c) t)]^(-d); +inf below t=1e-12."""
    if t <= 0:
        raise ValueError("t must be positive")
    if t < 1e-12:
        return math.inf
    return (2.0 * math.sinh(math.sqrt(float(c)) * t)) ** (-d)


def _truncation_radius(potential: PotentialSpec, t: float, threshold: float = 700.0) -> float:
    """Smallest power-of-two radius beyond which t*V exceeds ``threshold``."""
    r = 1.0
    while t * potential.eval_float(r) < threshold or t * potential.eval_float(2 * r) < threshold:
        r *= 2.0
        if r > 1e12:
            raise QuadratureError("potential grows too slowly to truncate the integral")
    return r


def quadrature_I(k: int, t: float, potential: PotentialSpec, diag_k: RadialPoly) -> float:
    """Radial integral S_n * int_0^inf r^(n-1) A_k(r) exp(-t V(r)) dr.

    Adaptive Simpson quadrature with interval halving to a 1e-9 relative
    target; the domain is cut off once t*V >= 700, i.e. where the weight
    is below double-precision underflow.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if diag_k.is_zero():
        return 0.0
    n = potential.dimension
    sr, sh = sphere_area_constant(n)
    s_n = float(sr) * math.pi ** (sh / 2.0)
    rstar = _truncation_radius(potential, t)

    vpoly = [(d, float(c)) for d, c in sorted(potential.coeffs)]
    apoly = [(d, float(c)) for d, c in sorted(diag_k.coeffs.items())]

    def f(r: float) -> float:
        v = sum(c * r**d for d, c in vpoly)
        a = sum(c * r**d for d, c in apoly)
        return r ** (n - 1) * a * math.exp(-t * v)

    # coarse composite Simpson estimate to set the absolute tolerance
    panels = 256
    h = rstar / panels
    xs = [i * h for i in range(panels + 1)]
    fs = [f(x) for x in xs]
    coarse = sum(
        (h / 6.0) * (fs[i] + 4.0 * f(xs[i] + h / 2.0) + fs[i + 1]) for i in range(panels)
    )
    tol = 1e-9 * max(abs(coarse), 1e-280)

    total = 0.0
    # stack entries: (a, b, fa, fm, fb, simpson(a,b), local tolerance, depth)
    stack = []
    for i in range(panels):
        a, b = xs[i], xs[i + 1]
        fa, fb = fs[i], fs[i + 1]
        fm = f((a + b) / 2.0)
        whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        stack.append((a, b, fa, fm, fb, whole, tol / panels, 0))
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        if depth > 48:
            raise QuadratureError("adaptive quadrature did not converge")
        m = (a + b) / 2.0
        lm = f((a + m) / 2.0)
        rm = f((m + b) / 2.0)
        left = (m - a) / 6.0 * (fa + 4.0 * lm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * rm + fb)
        if abs(left + right - whole) <= 15.0 * eps:
            total += left + right + (left + right - whole) / 15.0
        else:
            stack.append((a, m, fa, lm, fm, left, eps / 2.0, depth + 1))
            stack.append((m, b, fm, rm, fb, right, eps / 2.0, depth + 1))
    return s_n * total


@dataclass(frozen=True)
class SpectralConfig:
    """Knobs for the finite-difference trace oracle."""

    rmax: float | None = None  # None: pick R from V(R) >= 50/t
    grid_n: int = 4096
    l_max: int = 60
    eps_tail: float = 1e-12
    eps_chan: float = 1e-12

    def __post_init__(self):
        if self.rmax is not None and not self.rmax > 0:
            raise ValueError("rmax must be positive")
        if self.grid_n < 16:
            raise ValueError("grid_n must be at least 16")
        if self.l_max < 0:
            raise ValueError("l_max must be nonnegative")
        for name in ("eps_tail", "eps_chan"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


def _auto_radius(potential: PotentialSpec, t: float) -> float:
    """Radius with V(R) >= 50/t, found by doubling then 40 bisection steps."""
    target = 50.0 / t
    hi = 1.0
    while potential.eval_float(hi) < target:
        hi *= 2.0
        if hi > 1e9:
            raise SpectralError("cannot confine the potential at this t")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if potential.eval_float(mid) < target:
            lo = mid
        else:
            hi = mid
    return 1.02 * hi


# (potential, R, m, l) -> (lambda_cut, eigenvalues <= lambda_cut)
_EIG_CACHE: "OrderedDict[tuple, Tuple[float, np.ndarray]]" = OrderedDict()
_EIG_CACHE_MAX = 1024


def _channel_eigenvalues(
    potential: PotentialSpec, radius: float, m: int, l: int | None, lam_cut: float
) -> np.ndarray:
    """Eigenvalues below lam_cut of the discretized radial/line operator.

    l is None for the one-dimensional operator on [-R, R]; otherwise the
    angular-momentum-l radial operator on (0, R] with Dirichlet ends.
    Second-order central differences on m interior points; eigenvalues come
    from bisection on the symmetric tridiagonal matrix.
    """
    key = (potential, radius, m, l)
    hit = _EIG_CACHE.get(key)
    if hit is not None and hit[0] >= lam_cut:
        _EIG_CACHE.move_to_end(key)
        return hit[1][hit[1] <= lam_cut]

    if l is None:
        h = 2.0 * radius / (m + 1)
        grid = -radius + h * np.arange(1, m + 1)
        pot = np.array([potential.eval_float(abs(x)) for x in grid])
    else:
        h = radius / (m + 1)
        grid = h * np.arange(1, m + 1)
        pot = np.array([potential.eval_float(r) for r in grid])
        pot = pot + l * (l + 1) / grid**2
    diag = 2.0 / h**2 + pot
    off = np.full(m - 1, -1.0 / h**2)
    lo = min(0.0, float(pot.min())) - 1.0
    eigs = eigh_tridiagonal(
        diag,
        off,
        eigvals_only=True,
        select="v",
        select_range=(lo, lam_cut),
        lapack_driver="stebz",
    )
    eigs = np.sort(eigs)
    _EIG_CACHE[key] = (lam_cut, eigs)
    while len(_EIG_CACHE) > _EIG_CACHE_MAX:
        _EIG_CACHE.popitem(last=False)
    return eigs


def _trace_on_grid(
    potential: PotentialSpec, t: float, radius: float, m: int, cfg: SpectralConfig
) -> Tuple[float, float]:
    """(channel-summed trace, channel tail estimate) on one grid."""
    n = potential.dimension
    lam_cut = -math.log(cfg.eps_tail) / t
    if n == 1:
        eigs = _channel_eigenvalues(potential, radius, m, None, lam_cut)
        if eigs.size and potential.eval_float(radius) < eigs[0]:
            raise SpectralError(
                "rmax too small: the ground state is not confined (V(R) < lambda_0)"
            )
        return float(np.exp(-t * eigs).sum()), 0.0

    total = 0.0
    contributions: List[float] = []
    tail = 0.0
    for l in range(cfg.l_max + 1):
        eigs = _channel_eigenvalues(potential, radius, m, l, lam_cut)
        if l == 0 and eigs.size and potential.eval_float(radius) < eigs[0]:
            raise SpectralError(
                "rmax too small: the ground state is not confined (V(R) < lambda_0)"
            )
        contrib = (2 * l + 1) * float(np.exp(-t * eigs).sum())
        total += contrib
        contributions.append(contrib)
        if l >= 2 and total > 0 and contrib < cfg.eps_chan * total:
            return total, 0.0
    # l_max reached before the stop rule: bound the tail geometrically.
    if len(contributions) >= 2 and contributions[-2] > 0:
        ratio = contributions[-1] / contributions[-2]
        if ratio < 0.9:
            tail = contributions[-1] * ratio / (1.0 - ratio)
        else:
            raise SpectralError(
                "channel sum not converging: contributions are not decaying by l_max"
            )
    return total, tail


def spectral_trace(
    potential: PotentialSpec, t: float, cfg: SpectralConfig | None = None
) -> Tuple[float, float]:
    """Finite-difference value of Tr exp(-tH) with an error estimate.

    Dimension 1 solves -u'' + V(|x|) u on [-R, R]; dimension 3 sums
    angular-momentum channels -u'' + [l(l+1)/r^2 + V(r)] u with weight
    (2l+1).  The returned value is Richardson-extrapolated from grids with
    m and 2m points; the error estimate combines the extrapolation
    difference with any unconverged channel tail.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if potential.dimension not in (1, 3):
        raise ValueError("spectral oracle supports dimensions 1 and 3 only")
    cfg = cfg or SpectralConfig()
    radius = cfg.rmax if cfg.rmax is not None else _auto_radius(potential, t)
    coarse, tail1 = _trace_on_grid(potential, t, radius, cfg.grid_n, cfg)
    fine, tail2 = _trace_on_grid(potential, t, radius, 2 * cfg.grid_n, cfg)
    value = fine + (fine - coarse) / 3.0 + tail2
    err = abs(fine - coarse) / 3.0 + tail2
    return value, err


def _exact_reference(potential: PotentialSpec, t: float) -> float | None:
    """Closed-form trace when available (harmonic, possibly shifted by c_0)."""
    degs = {d for d, _ in potential.coeffs}
    if degs <= {0, 2}:
        c0 = potential.coefficient(0)
        return math.exp(-float(c0) * t) * harmonic_trace_eval(
            potential.dimension, potential.coefficient(2), t
        )
    return None


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the remainder-order probe."""

    alpha: float  # fitted decay exponent (nan if everything saturated)
    per_pair: Tuple[float, ...]  # one exponent estimate per usable t pair
    noise_floor: bool  # True when the expansion already matches the oracle
    details: Tuple[Tuple[float, float, float], ...] = field(default=())
    # details rows: (t, |oracle - expansion|, oracle error estimate)


def remainder_order_probe(
    exp: TraceExpansion,
    potential: PotentialSpec,
    t_pairs: Sequence[Tuple[float, float]],
    cfg: SpectralConfig | None = None,
) -> ProbeResult:
    """Fit |oracle(t) - expansion(t)| ~ C t^alpha over the given t pairs.

    Uses the closed-form trace for harmonic potentials and the spectral
    oracle otherwise.  Pairs where the difference is within the oracle's
    own error estimate are reported as noise-floor saturation rather than
    contributing a bogus exponent.
    """
    samples: Dict[float, Tuple[float, float]] = {}

    def measure(t: float) -> Tuple[float, float]:
        if t not in samples:
            ref = _exact_reference(potential, t)
            if ref is not None:
                oracle, err = ref, 1e-13 * abs(ref)
            else:
                oracle, err = spectral_trace(potential, t, cfg)
            diff = abs(oracle - eval_expansion(exp, t))
            samples[t] = (diff, err)
        return samples[t]

    per_pair: List[float] = []
    saturated = 0
    details: List[Tuple[float, float, float]] = []
    for t1, t2 in t_pairs:
        d1, e1 = measure(t1)
        d2, e2 = measure(t2)
        details.append((t1, d1, e1))
        details.append((t2, d2, e2))
        if d1 <= 4 * e1 or d2 <= 4 * e2 or d2 == 0.0:
            saturated += 1
            continue
        per_pair.append(math.log(d1 / d2) / math.log(t1 / t2))
    if not per_pair:
        return ProbeResult(math.nan, (), True, tuple(details))
    alpha = sum(per_pair) / len(per_pair)
    return ProbeResult(alpha, tuple(per_pair), False, tuple(details))
