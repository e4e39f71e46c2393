"""Oracles: exact harmonic series, quadrature, spectral trace, order probe."""

import math

import pytest

from heattrace.assembly import i_expansion_eval, trace_expansion
from heattrace.exactalg import rat
from heattrace.oracles import (
    LaurentSeries,
    SpectralConfig,
    SpectralError,
    harmonic_trace_eval,
    harmonic_trace_series,
    quadrature_I,
    remainder_order_probe,
    spectral_trace,
)
from heattrace.parametrix import PotentialSpec, build_parametrix


def harmonic(n, c=1):
    return PotentialSpec.from_coeffs(n, {2: c})


QUARTIC = PotentialSpec.from_coeffs(3, {0: 1, 2: 2, 4: 3})


class TestHarmonicSeries:
    def test_three_dimensional_coefficients(self):
        s = harmonic_trace_series(3, 1, 3)
        assert s.coeff(-3) == rat(1, 8)
        assert s.coeff(-1) == rat(-1, 16)
        assert s.coeff(1) == rat(17, 960)
        assert s.coeff(3) == rat(-457, 120960)

    def test_even_powers_absent_in_three_dimensions(self):
        s = harmonic_trace_series(3, 1, 3)
        for p in (-2, 0, 2):
            assert s.coeff(p) == 0
        assert set(s.coeffs) == {-3, -1, 1, 3}

    def test_one_dimensional_series(self):
        # 1/(2 sinh u) = 1/(2u) - u/12 + 7u^3/720 - ...
        s = harmonic_trace_series(1, 1, 3)
        assert s.coeff(-1) == rat(1, 2)
        assert s.coeff(1) == rat(-1, 12)
        assert s.coeff(3) == rat(7, 720)

    def test_coupling_is_symbolic(self):
        # same rationals for any coupling; the c powers live in eval
        a = harmonic_trace_series(3, 1, 1)
        b = harmonic_trace_series(3, rat(9, 4), 1)
        assert a.coeffs == b.coeffs
        # c = 9/4: coeff(t^-3) * c^(-3/2) = (1/8) * (8/27)
        assert b.eval(1.0) != a.eval(1.0)

    def test_eval_matches_closed_form_at_small_t(self):
        s = harmonic_trace_series(3, 1, 7)
        closed = harmonic_trace_eval(3, 1, 0.1)
        assert abs(s.eval(0.1) - closed) / closed < 1e-6

    def test_validation(self):
        with pytest.raises(ValueError):
            harmonic_trace_series(0, 1, 3)
        with pytest.raises(ValueError):
            harmonic_trace_series(3, -1, 3)
        with pytest.raises(ValueError):
            harmonic_trace_series(3, 1, -5)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_against_high_precision_closed_form(self, d):
        # independent route: at 50 digits the truncation error of the exact
        # series against the closed form must equal the next series terms
        import mpmath

        mpmath.mp.dps = 50
        t = mpmath.mpf(1) / 64

        def ev(series):
            return sum(
                mpmath.mpf(int(r.numerator)) / int(r.denominator) * t**p
                for p, r in series.coeffs.items()
            )

        short = harmonic_trace_series(d, 1, 6)
        longer = harmonic_trace_series(d, 1, 14)
        closed = (2 * mpmath.sinh(t)) ** (-d)
        error = abs(closed - ev(short))
        predicted = abs(
            sum(
                mpmath.mpf(int(r.numerator)) / int(r.denominator) * t**p
                for p, r in longer.coeffs.items()
                if p > 6
            )
        )
        assert predicted > 0
        assert abs(error - predicted) <= predicted * mpmath.mpf(10) ** -6


class TestHarmonicEval:
    def test_reference_point(self):
        assert harmonic_trace_eval(3, 1, 1.0) == pytest.approx(0.0770146491599134, rel=1e-13)

    def test_dominant_eigenvalue_at_large_t(self):
        # 1/(2 sinh t) -> e^(-t) as t grows
        assert harmonic_trace_eval(1, 1, 25.0) == pytest.approx(math.exp(-25.0), rel=1e-12)

    def test_small_t_overflow_indicator(self):
        assert harmonic_trace_eval(3, 1, 1e-13) == math.inf
        with pytest.raises(ValueError):
            harmonic_trace_eval(3, 1, 0.0)


class TestQuadrature:
    def test_gaussian_moment(self):
        # S_3 int r^2 exp(-r^2) dr = 4 pi * sqrt(pi)/4 = pi^(3/2)
        pot = harmonic(3)
        ps = build_parametrix(pot, 0)
        got = quadrature_I(0, 1.0, pot, ps.diag[0])
        assert got == pytest.approx(math.pi**1.5, rel=1e-9)

    def test_zero_diagonal(self):
        pot = harmonic(3)
        ps = build_parametrix(pot, 1)
        assert quadrature_I(1, 0.5, pot, ps.diag[1]) == 0.0

    def test_matches_expansion_on_quartic(self):
        # order 18 keeps ten nonzero terms (odd orders vanish identically)
        ps = build_parametrix(QUARTIC, 2)
        quad = quadrature_I(2, 0.1, QUARTIC, ps.diag[2])
        approx = i_expansion_eval(3, 2, QUARTIC, ps.diag[2], 18, 0.1)
        assert abs(quad - approx) / abs(quad) < 1e-5

    def test_rejects_nonpositive_t(self):
        pot = harmonic(3)
        ps = build_parametrix(pot, 0)
        with pytest.raises(ValueError):
            quadrature_I(0, -1.0, pot, ps.diag[0])


class TestSpectral:
    def test_one_dimensional_harmonic(self):
        # eigenvalues 2n+1 sum to 1/(2 sinh t)
        v, err = spectral_trace(harmonic(1), 1.0)
        exact = 1.0 / (2.0 * math.sinh(1.0))
        assert abs(v - exact) / exact < 1e-6
        assert err < 1e-4

    def test_three_dimensional_harmonic(self):
        v, _ = spectral_trace(harmonic(3), 0.5)
        exact = harmonic_trace_eval(3, 1, 0.5)
        assert abs(v - exact) / exact < 1e-4

    def test_trace_grows_as_t_shrinks(self):
        cfg = SpectralConfig(grid_n=1024, l_max=40)
        hi, _ = spectral_trace(QUARTIC, 0.1, cfg)
        lo, _ = spectral_trace(QUARTIC, 0.2, cfg)
        assert hi > lo

    def test_error_estimate_shrinks_with_grid(self):
        _, e1 = spectral_trace(harmonic(1), 1.0, SpectralConfig(grid_n=512))
        _, e2 = spectral_trace(harmonic(1), 1.0, SpectralConfig(grid_n=1024))
        assert e1 / e2 > 3.5

    def test_dimension_support(self):
        with pytest.raises(ValueError, match="dimensions 1 and 3"):
            spectral_trace(harmonic(2), 1.0)

    def test_rmax_too_small(self):
        with pytest.raises(SpectralError, match="not confined"):
            spectral_trace(harmonic(1), 1.0, SpectralConfig(rmax=1.0, grid_n=256))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SpectralConfig(grid_n=4)
        with pytest.raises(ValueError):
            SpectralConfig(eps_tail=0.0)
        with pytest.raises(ValueError):
            SpectralConfig(rmax=-1.0)

    def test_rejects_nonpositive_t(self):
        with pytest.raises(ValueError):
            spectral_trace(harmonic(1), 0.0)


class TestRemainderProbe:
    def test_harmonic_order(self):
        # J = 8, d = 3: first omitted nonzero term sits at overall power t^3
        pot = harmonic(3)
        exp = trace_expansion(pot, 3, 8)
        probe = remainder_order_probe(exp, pot, [(0.2, 0.1), (0.1, 0.05)])
        assert not probe.noise_floor
        assert probe.alpha == pytest.approx(3.0, abs=0.3)

    def test_noise_floor_reported(self):
        pot = harmonic(3)
        exp = trace_expansion(pot, 3, 8)
        probe = remainder_order_probe(exp, pot, [(2e-4, 1e-4)])
        assert probe.noise_floor
        assert math.isnan(probe.alpha)

    def test_constant_shift_uses_closed_form(self):
        # V = c0 + c r^2 has trace exp(-c0 t) / (2 sinh(sqrt(c) t))^d
        pot = PotentialSpec.from_coeffs(3, {0: rat(1, 2), 2: 1})
        exp = trace_expansion(pot, 3, 8)
        probe = remainder_order_probe(exp, pot, [(0.2, 0.1)])
        assert not probe.noise_floor
        # expansion error decays at least like the remainder order
        assert probe.alpha > float(exp.remainder_power) - 0.3


class TestSeriesMatchesAssembledExpansion:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_exact_identity_after_prefactor(self, d):
        from heattrace.assembly import trace_expansion

        c = rat(5, 3)
        pot = harmonic(d, c)
        exp = trace_expansion(pot, d, 6)
        series = harmonic_trace_series(d, c, order=-d + 3)
        for j in range(7):
            got = exp.combined_coefficient(j).grounded(c)
            power = exp.leading_power + rat(j, 2)
            want = {}
            if power.denominator == 1 and series.coeff(int(power)):
                r = series.coeff(int(power))
                e = rat(power, 2)
                fl = e.numerator // e.denominator
                want = {(0, rat(1), e - fl): r * c**fl}
            assert got == want, (d, j)


class TestLaurentSeriesType:
    def test_eval_and_accessors(self):
        s = LaurentSeries(dimension=1, coupling=rat(4), coeffs={-1: rat(1, 2)}, order=0)
        # (1/2) c^(-1/2) / t at c = 4, t = 2
        assert s.eval(2.0) == pytest.approx(0.125)
        assert s.coeff(-1) == rat(1, 2)
        assert s.coeff(5) == 0
