"""Transport recursion: published diagonal values, closed forms, invariants."""

import random
import warnings

import pytest

from heattrace.exactalg import (
    MPoly,
    RadialPoly,
    evaluate,
    poly_diff,
    rat,
)
from heattrace.parametrix import (
    PotentialSpec,
    build_parametrix,
    clear_caches,
    degree_bound,
    diag_closed_forms,
    transport_rhs,
    transport_solve,
)


def harmonic(n, c=1):
    return PotentialSpec.from_coeffs(n, {2: c})


def random_even_potential(rng, n, q):
    coeffs = {q: rat(rng.randint(1, 5), rng.randint(1, 3))}
    for d in range(2, q, 2):
        if rng.random() < 0.8:
            coeffs[d] = rat(rng.randint(-4, 4), rng.randint(1, 3))
    if rng.random() < 0.5:
        coeffs[0] = rat(rng.randint(0, 5))
    with warnings.catch_warnings():
        # negative dips only matter for the trace interpretation, not the algebra
        warnings.simplefilter("ignore", UserWarning)
        return PotentialSpec.from_coeffs(n, coeffs)


class TestPotentialSpec:
    def test_rejects_odd_power(self):
        with pytest.raises(ValueError, match="odd power"):
            PotentialSpec.from_coeffs(3, {3: 1})

    def test_rejects_nonpositive_leading(self):
        with pytest.raises(ValueError, match="positive"):
            PotentialSpec.from_coeffs(3, {4: -1, 0: 1})

    def test_rejects_negative_constant(self):
        with pytest.raises(ValueError, match="nonnegative"):
            PotentialSpec.from_coeffs(3, {0: -1, 2: 1})

    def test_rejects_constant_only(self):
        with pytest.raises(ValueError, match="q >= 2"):
            PotentialSpec.from_coeffs(3, {0: 2})

    def test_negative_dip_warns_but_constructs(self):
        with pytest.warns(UserWarning, match="negative"):
            pot = PotentialSpec.from_coeffs(1, {0: 1, 2: -5, 4: 1})
        assert pot.q == 4

    def test_accessors(self):
        pot = PotentialSpec.from_coeffs(3, {0: 1, 4: rat(3, 2)})
        assert pot.q == 4
        assert pot.cq == rat(3, 2)
        assert pot.coefficient(2) == 0
        assert pot.lower_coeff_list() == (rat(1), rat(0), rat(0), rat(0))


class TestFirstCoefficient:
    def test_one_dimensional_square_well(self):
        # V = x^2: first coefficient is x^2 - (x^2 + x y + y^2)/3
        ps = build_parametrix(harmonic(1), 1)
        want = MPoly.from_exponents(
            1, [((2, 0, 0), rat(2, 3)), ((1, 1, 0), rat(-1, 3)), ((0, 2, 0), rat(-1, 3))]
        )
        assert ps.offdiag[1] == want

    def test_transport_route_matches_ray_average(self):
        # solving the order-zero transport equation must reproduce
        # V(x) - average of V along the ray
        rng = random.Random(11)
        from heattrace.exactalg import integrate_s_unit, substitute_line
        from heattrace.parametrix import _derived

        for _ in range(6):
            n = rng.choice([1, 2, 3])
            pot = random_even_potential(rng, n, rng.choice([2, 4]))
            d = _derived(pot)
            via_solve = transport_solve(0, d["drift"])
            via_average = d["v"] - integrate_s_unit(substitute_line(d["v"]))
            assert via_solve == via_average


class TestPublishedDiagonals:
    def test_harmonic_diag(self):
        c = rat(5, 7)
        ps = build_parametrix(harmonic(3, c), 3)
        assert ps.diag[0] == RadialPoly({0: 1})
        assert ps.diag[1].is_zero()
        assert ps.diag[2] == RadialPoly({0: -c})
        assert ps.diag[3] == RadialPoly({2: c * c / 3})

    def test_quartic_diag(self):
        c0, c2, c4 = rat(1), rat(2), rat(3)
        pot = PotentialSpec.from_coeffs(3, {0: c0, 2: c2, 4: c4})
        ps = build_parametrix(pot, 3)
        assert ps.diag[2] == RadialPoly({0: -c2, 2: rat(-10, 3) * c4})
        assert ps.diag[3] == RadialPoly(
            {0: -2 * c4, 2: c2 * c2 / 3, 4: rat(4, 3) * c2 * c4, 6: rat(4, 3) * c4 * c4}
        )

    def test_sestic_diag(self):
        c0, c2, c4, c6 = (rat(v) for v in (1, 1, 1, 1))
        pot = PotentialSpec.from_coeffs(3, {0: c0, 2: c2, 4: c4, 6: c6})
        ps = build_parametrix(pot, 3)
        assert ps.diag[2] == RadialPoly({0: -c2, 2: rat(-10, 3) * c4, 4: -7 * c6})
        assert ps.diag[3] == RadialPoly(
            {
                0: -2 * c4,
                2: -14 * c6 + c2 * c2 / 3,
                4: rat(4, 3) * c2 * c4,
                6: rat(4, 3) * c4 * c4 + 2 * c2 * c6,
                8: 4 * c4 * c6,
                10: 3 * c6 * c6,
            }
        )


class TestClosedForms:
    def test_harmonic_level_four(self):
        # hessian is 2c * identity: (lap V)^2/72 + |hess|^2/90 = c^2/2 + 2c^2/15
        c = rat(3)
        forms = diag_closed_forms(harmonic(3, c))
        assert forms[2] == RadialPoly({0: -c})
        assert forms[3] == RadialPoly({2: c * c / 3})
        assert forms[4] == RadialPoly({0: c * c / 2 + 2 * c * c / 15})

    def test_recursion_matches_closed_forms(self):
        rng = random.Random(12)
        for _ in range(6):
            n = rng.choice([1, 2, 3])
            q = rng.choice([2, 4, 6])
            pot = random_even_potential(rng, n, q)
            ps = build_parametrix(pot, 4)
            forms = diag_closed_forms(pot)
            for k in range(5):
                assert ps.diag[k] == forms[k], f"k={k} {pot}"


class TestTransportEquation:
    def test_rhs_requires_prior_levels(self):
        ps = build_parametrix(harmonic(1), 1)
        with pytest.raises(ValueError, match="insufficient"):
            transport_rhs(2, ps)
        with pytest.raises(ValueError, match="k >= 1"):
            transport_rhs(0, ps)

    def test_zero_rhs(self):
        assert transport_solve(3, MPoly.zero(2)).is_zero()

    def test_residual_vanishes_identically(self):
        rng = random.Random(13)
        for _ in range(4):
            n = rng.choice([1, 2])
            pot = random_even_potential(rng, n, rng.choice([2, 4]))
            ps = build_parametrix(pot, 4, keep_rhs=True)
            for k in range(4):
                a_next = ps.offdiag[k + 1]
                lhs = a_next.scale(k + 1)
                for i in range(1, n + 1):
                    xi = MPoly.variable(n, f"x{i}")
                    yi = MPoly.variable(n, f"y{i}")
                    lhs = lhs + (xi - yi) * poly_diff(a_next, f"x{i}")
                assert (lhs - ps.rhs[k]).is_zero(), f"k={k} {pot}"

    def test_degree_bound_and_first_diagonal(self):
        rng = random.Random(14)
        for _ in range(4):
            n = rng.choice([1, 2])
            q = rng.choice([2, 4, 6])
            pot = random_even_potential(rng, n, q)
            ps = build_parametrix(pot, 5)
            assert ps.diag[1].is_zero()
            for k in range(6):
                assert ps.diag[k].degree() <= degree_bound(k, q)

    def test_scaling_covariance(self):
        # V~(r) = lam^2 V(lam r) maps A_k(x, y) to lam^(2k) A_k(lam x, lam y)
        rng = random.Random(15)
        lam = rat(3, 2)
        for _ in range(3):
            n = rng.choice([1, 2])
            q = rng.choice([2, 4])
            pot = random_even_potential(rng, n, q)
            scaled = PotentialSpec.from_coeffs(
                n, {d: c * lam ** (d + 2) for d, c in pot.coeffs}
            )
            ps = build_parametrix(pot, 3)
            pt = build_parametrix(scaled, 3)
            for _ in range(3):
                xs = [rat(rng.randint(-4, 4), 3) for _ in range(n)]
                ys = [rat(rng.randint(-4, 4), 3) for _ in range(n)]
                lxs = [lam * x for x in xs]
                lys = [lam * y for y in ys]
                for k in range(4):
                    got = evaluate(pt.offdiag[k], xs, ys)
                    want = lam ** (2 * k) * evaluate(ps.offdiag[k], lxs, lys)
                    assert got == want, f"k={k}"


class TestBuildBehavior:
    def test_cache_extension_matches_fresh_build(self):
        clear_caches()
        pot = PotentialSpec.from_coeffs(2, {0: 1, 4: rat(1, 2)})
        shallow = build_parametrix(pot, 2)
        extended = build_parametrix(pot, 4)
        clear_caches()
        fresh = build_parametrix(pot, 4)
        assert extended.offdiag == fresh.offdiag
        assert extended.diag == fresh.diag
        assert shallow.offdiag == fresh.offdiag[:3]

    def test_depth_zero(self):
        ps = build_parametrix(harmonic(2), 0)
        assert ps.depth == 0
        assert ps.offdiag[0] == MPoly.const(2, 1)

    def test_keep_rhs_after_cached_prefix(self):
        clear_caches()
        pot = harmonic(1, rat(2))
        build_parametrix(pot, 3)
        ps = build_parametrix(pot, 3, keep_rhs=True)
        assert ps.rhs is not None and len(ps.rhs) == 3
        # rhs[0] is the drift term (x-y).grad V
        n = 1
        xs, ys = [rat(1, 2)], [rat(-1, 3)]
        drift_val = evaluate(ps.rhs[0], xs, ys)
        assert drift_val == (xs[0] - ys[0]) * 2 * rat(2) * xs[0]

    def test_depth_cap_via_environment(self, monkeypatch):
        monkeypatch.setenv("HEATTRACE_MAX_K", "3")
        with pytest.raises(ValueError, match="exceeds the cap"):
            build_parametrix(harmonic(1), 5)
        monkeypatch.setenv("HEATTRACE_MAX_K", "not-a-number")
        with pytest.raises(ValueError, match="integer"):
            build_parametrix(harmonic(1), 1)

    def test_negative_depth_rejected(self):
        with pytest.raises(ValueError):
            build_parametrix(harmonic(1), -1)
