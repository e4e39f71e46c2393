"""Exact small-t expansion of Schrodinger heat-kernel traces.

For H = -Laplacian + V(|x|) on R^n with a radial polynomial potential V of
even degree q, this package computes the expansion

    Tr exp(-tH) ~ prefactor * t^(-n/2-n/q) * sum_j a_j t^(j/q)

in exact rational/Gamma arithmetic, and cross-validates it against the
closed-form harmonic trace, direct quadrature of the radial integrals, and
a finite-difference spectrum.
"""

from .exactalg import (
    MPoly,
    NotRadialError,
    RadialPoly,
    Rational,
    coincidence_limit,
    integrate_s_unit,
    laplacian_x,
    poly_arith,
    poly_diff,
    radial_reduce,
    rat,
    substitute_line,
)
from .parametrix import (
    ParametrixSet,
    PotentialSpec,
    build_parametrix,
    diag_closed_forms,
    transport_rhs,
    transport_solve,
)
from .assembly import (
    CoeffValue,
    TraceExpansion,
    a_coeff,
    eval_expansion,
    gamma_k,
    H_poly,
    multinomial_D,
    omega,
    series_assembly_direct,
    T_coeff,
    trace_expansion,
)
from .oracles import (
    LaurentSeries,
    ProbeResult,
    SpectralConfig,
    harmonic_trace_eval,
    harmonic_trace_series,
    quadrature_I,
    remainder_order_probe,
    spectral_trace,
)

__version__ = "0.1.0"

__all__ = [
    "MPoly",
    "NotRadialError",
    "RadialPoly",
    "Rational",
    "rat",
    "poly_arith",
    "poly_diff",
    "laplacian_x",
    "substitute_line",
    "integrate_s_unit",
    "coincidence_limit",
    "radial_reduce",
    "PotentialSpec",
    "ParametrixSet",
    "build_parametrix",
    "transport_rhs",
    "transport_solve",
    "diag_closed_forms",
    "CoeffValue",
    "TraceExpansion",
    "gamma_k",
    "multinomial_D",
    "H_poly",
    "omega",
    "T_coeff",
    "a_coeff",
    "trace_expansion",
    "series_assembly_direct",
    "eval_expansion",
    "LaurentSeries",
    "SpectralConfig",
    "ProbeResult",
    "harmonic_trace_series",
    "harmonic_trace_eval",
    "quadrature_I",
    "spectral_trace",
    "remainder_order_probe",
    "__version__",
]
