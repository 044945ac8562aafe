#!/usr/bin/env python3
"""Test suite for the Laplace transform laboratory"""

import math

import numpy as np
import pytest

from nstable.errors import DomainError, ParameterError
from nstable.families import (
    binary_split,
    chebyshev_hitting,
    constant_offspring,
    finite_offspring,
    geometric,
    identity_pgf,
    negative_binomial_kM,
    neveu_H,
    shifted_geom_H,
    theta_H,
    yule_H,
)
from nstable.series import PgfVerdict
from nstable.transforms import (
    ScanResult,
    bgw_limit_transform,
    bunge_map,
    classify_scan,
    commute_check,
    cosh_transform,
    ct_laplace_inverse,
    ct_limit_transform,
    delta_transform,
    exponential_transform,
    gamma_transform,
    laplace_inverse,
    laplace_mean_limit,
    mittag_leffler_transform,
    moment_spot_check,
    non_explosive,
    pgfness_of_map,
    poincare_residual,
    scaling_limit_check,
    semigroup_scan,
    shifted_ml_transform,
)

S_GRID = np.linspace(0.0, 1.0, 101)

CATALOGUED = [
    exponential_transform(),
    delta_transform(),
    cosh_transform(),
    gamma_transform(0.5),
    gamma_transform(2.0 / 3.0),
    shifted_ml_transform(),
    mittag_leffler_transform(0.5),
]


@pytest.fixture
def cosh():
    """1/cosh(sqrt(2u))"""
    return cosh_transform()


class TestInversion:
    """Test cases for laplace_inverse"""

    def test_cosh_at_one_half(self, cosh):
        """Test cosh(sqrt(2u)) = 2 at s = 1/2"""
        expected = math.log(2.0 + math.sqrt(3.0)) ** 2 / 2.0
        assert laplace_inverse(cosh, 0.5) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.8674, abs=1e-4)

    @pytest.mark.parametrize("L", CATALOGUED, ids=lambda L: f"{L.name}{L.params or ''}")
    def test_round_trip(self, L):
        """Test L(laplace_inverse(L, s)) = s on (atom, 1]"""
        s = np.linspace(L.atom + 2e-6, 1.0, 41)
        assert np.allclose(L(laplace_inverse(L, s)), s, rtol=0, atol=1e-11)

    def test_round_trip_with_atom(self):
        """Test inversion above the atom of a BGW limit transform"""
        L = bgw_limit_transform(finite_offspring({0: 0.25, 2: 0.75}))
        assert L.atom == pytest.approx(1.0 / 3.0, abs=1e-12)
        s = np.linspace(0.34, 1.0, 12)
        assert np.allclose(L(laplace_inverse(L, s)), s, atol=1e-9)

    def test_at_one(self, cosh):
        """Test L^-1(1) = 0"""
        assert laplace_inverse(cosh, 1.0) == 0.0

    def test_above_one(self, cosh):
        """Test s > 1 is outside the domain"""
        with pytest.raises(DomainError):
            laplace_inverse(cosh, 1.5)

    def test_at_or_below_atom(self):
        """Test s at or below the atom is outside the domain"""
        L = bgw_limit_transform(finite_offspring({0: 0.25, 2: 0.75}))
        with pytest.raises(DomainError):
            laplace_inverse(L, 0.2)

    def test_array_shape(self, cosh):
        """Test array arguments keep their shape"""
        s = np.full((2, 3), 0.5)
        assert laplace_inverse(cosh, s).shape == (2, 3)


class TestBungeMap:
    """Test cases for s -> L(c L^-1(s))"""

    @pytest.mark.parametrize("c", [1.5, 2.0, math.e, 10.0])
    def test_exponential_gives_geometric(self, c):
        """Test mapped exponential at c equals geometric(1/c)"""
        phi = bunge_map(exponential_transform(), c)
        assert np.allclose(phi(S_GRID), geometric(1.0 / c)(S_GRID), rtol=0, atol=1e-12)

    def test_cosh_at_four(self, cosh):
        """Test mapped cosh at c = 4 equals s^2/(2 - s^2)"""
        phi = bunge_map(cosh, 4.0)
        assert np.allclose(phi(S_GRID), S_GRID**2 / (2.0 - S_GRID**2), rtol=0, atol=1e-12)

    def test_scale_one_is_identity(self, cosh):
        """Test c = 1"""
        assert np.array_equal(bunge_map(cosh, 1.0)(S_GRID), S_GRID)

    def test_scale_below_one(self, cosh):
        """Test c < 1 is rejected"""
        with pytest.raises(ParameterError):
            bunge_map(cosh, 0.5)

    @pytest.mark.parametrize("L", [cosh_transform(), gamma_transform(0.5), mittag_leffler_transform(0.5)], ids=lambda L: L.name)
    def test_homomorphism(self, L):
        """Test phi_2(phi_3(s)) = phi_6(s)"""
        composed = bunge_map(L, 2.0)(bunge_map(L, 3.0)(S_GRID))
        assert np.allclose(composed, bunge_map(L, 6.0)(S_GRID), rtol=0, atol=1e-10)

    @pytest.mark.parametrize("c", [2.0, 3.0, 5.0])
    def test_accepted_maps_are_monotone(self, c):
        """Test accepted maps send [0, 1] to [0, 1] monotonically"""
        values = bunge_map(gamma_transform(0.5), c)(S_GRID)
        assert values.min() >= 0.0 and values.max() <= 1.0
        assert np.all(np.diff(values) >= 0)

    def test_scalar(self, cosh):
        """Test scalar evaluation"""
        assert isinstance(bunge_map(cosh, 4.0)(0.5), float)


class TestPoincareResidual:
    """Test cases for phi(L(u)) = L(cu)"""

    def test_geometric_exponential(self):
        """Test geometric(1/2) with 1/(1 + u) at c = 2"""
        u = np.linspace(0.0, 20.0, 201)
        assert poincare_residual(geometric(0.5), exponential_transform(), 2.0, u) < 1e-14

    def test_negative_binomial_gamma(self):
        """Test negbin-kM(1/2, 2) with (1 + 2u)^(-1/2) at c = 2"""
        u = np.linspace(0.0, 20.0, 201)
        assert poincare_residual(negative_binomial_kM(0.5, 2), gamma_transform(0.5), 2.0, u) < 1e-14

    def test_hitting_time_cosh(self, cosh):
        """Test chebyshev-hitting(2) with the cosh transform at c = 4"""
        u = np.linspace(0.0, 20.0, 201)
        assert poincare_residual(chebyshev_hitting(2), cosh, 4.0, u) < 1e-12

    def test_wrong_scale(self):
        """Test that a wrong c leaves a residual"""
        u = np.linspace(0.0, 20.0, 201)
        assert poincare_residual(geometric(0.5), exponential_transform(), 3.0, u) > 1e-2


class TestPgfness:
    """Test cases for pgfness_of_map"""

    def test_series_hint_used(self, cosh):
        """Test exact series at square scales"""
        verdict = pgfness_of_map(cosh, 9.0)
        assert verdict.is_pgf
        assert verdict.method == "series-hint"

    def test_exponent_rejection(self, cosh):
        """Test phi(s) ~ K s^sqrt(2) is rejected"""
        verdict = pgfness_of_map(cosh, 2.0)
        assert not verdict.is_pgf
        assert verdict.method == "exponent"
        assert verdict.first_bad_index == 2

    def test_correction_exponent_rejection(self):
        """Test Gamma(2/3): phi(s) ~ K s (1 + A s^1.5) is rejected"""
        verdict = pgfness_of_map(gamma_transform(2.0 / 3.0), 2.0)
        assert not verdict.is_pgf
        assert verdict.method == "exponent"

    def test_probes_accept_without_hint(self):
        """Test that an admissible map without a series hint passes the probes"""
        verdict = pgfness_of_map(mittag_leffler_transform(1.0), 3.0)
        assert verdict.is_pgf
        assert verdict.method == "exponent+probe"

    def test_scale_below_one(self, cosh):
        """Test c < 1 is rejected"""
        with pytest.raises(ParameterError):
            pgfness_of_map(cosh, 0.9)


class TestSemigroupScan:
    """Test cases for semigroup_scan and classify_scan"""

    def test_exponential_full_interval(self):
        """Test every scale is accepted for the exponential law"""
        scan = semigroup_scan(exponential_transform(), [1.0, 1.5, 2.0, math.e, 4.0])
        assert scan.accepted == [1.0, 1.5, 2.0, math.e, 4.0]
        assert scan.classification == "FullInterval"

    def test_cosh_squares(self, cosh):
        """Test that the cosh law accepts exactly the squares"""
        scan = semigroup_scan(cosh, range(1, 17))
        assert scan.accepted == [1.0, 4.0, 9.0, 16.0]
        assert scan.classification == "Squares"
        assert scan.closure_violations() == []

    def test_delta_naturals(self):
        """Test that the unit mass accepts exactly the integers"""
        scan = semigroup_scan(delta_transform(), [1.0, 1.5, 2.0, 2.5, 3.0])
        assert scan.accepted == [1.0, 2.0, 3.0]
        assert scan.classification == "Naturals"

    def test_gamma_two_thirds_rejects(self):
        """Test that Gamma(2/3) admits no nontrivial scale"""
        scan = semigroup_scan(gamma_transform(2.0 / 3.0), [1.5, 2.0, 3.0])
        assert scan.accepted == []

    def test_thread_count_does_not_change_result(self, cosh):
        """Test scans merge in grid order"""
        grid = [1.0, 2.0, 4.0, 5.0, 9.0]
        assert semigroup_scan(cosh, grid, threads=1).to_dict() == semigroup_scan(cosh, grid, threads=3).to_dict()

    def test_grid_below_one(self, cosh):
        """Test scans need c >= 1"""
        with pytest.raises(ParameterError):
            semigroup_scan(cosh, [0.5, 1.0])

    def test_to_dict(self):
        """Test scan serialisation keys"""
        scan = semigroup_scan(delta_transform(), [1.0, 2.0])
        assert set(scan.to_dict()) == {"transform", "c_grid", "verdicts", "accepted", "classification"}

    @pytest.mark.parametrize("grid,accepted,expected", [
        ([1.0, 2.0, 4.0], [1.0], "Trivial"),
        ([1.0, 1.5, 2.0, 2.25, 3.0], [1.0, 1.5, 2.25], "Cyclic(1.5)"),
        ([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0], "Unclassified"),
        ([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0], "Unclassified"),
    ])
    def test_classification_templates(self, grid, accepted, expected):
        """Test template matching; ambiguous matches are never guessed"""
        assert classify_scan(grid, accepted) == expected

    def test_closure_violations(self):
        """Test that a rejected product of accepted scales is reported"""
        result = ScanResult("test", [1.0, 2.0, 4.0], [], [1.0, 2.0], "Unclassified")
        assert result.closure_violations() == [(2.0, 2.0)]


class TestCommutation:
    """Test cases for commute_check"""

    def test_same_family_commutes(self):
        """Test geometric members commute"""
        assert commute_check(geometric(0.5), geometric(0.3), S_GRID) < 1e-14

    def test_different_standard_laws(self):
        """Test geometric and hitting-time PGFs do not commute"""
        assert commute_check(geometric(0.5), chebyshev_hitting(2), S_GRID) > 1e-3

    def test_identity_commutes(self):
        """Test any PGF commutes with the identity"""
        assert commute_check(chebyshev_hitting(3), identity_pgf(), S_GRID) == 0.0

    def test_mapped_cosh_members(self, cosh):
        """Test mapped cosh members at c = 4 and 9 commute"""
        assert commute_check(bunge_map(cosh, 4.0), bunge_map(cosh, 9.0), S_GRID) < 1e-10


class TestLimits:
    """Test cases for scaling limits, means and the BGW limit transform"""

    def test_scaling_limit(self):
        """Test phi_c(e^{-u/c}) -> 1/(1 + u)"""
        assert scaling_limit_check(exponential_transform(), [10.0, 100.0, 1000.0]) < 1.0 / math.sqrt(1000.0)

    def test_moment_spot_check(self, cosh):
        """Test the mean of mapped PGFs is c"""
        assert moment_spot_check(exponential_transform(), 3.0).value == pytest.approx(3.0, rel=1e-9)
        assert moment_spot_check(cosh, 4.0).value == pytest.approx(4.0, rel=1e-9)

    def test_moment_spot_check_without_series(self):
        """Test transforms without a series hint"""
        with pytest.raises(ParameterError):
            moment_spot_check(mittag_leffler_transform(0.5), 2.0)

    @pytest.mark.parametrize("L", [exponential_transform(), cosh_transform(), shifted_ml_transform()], ids=lambda L: L.name)
    def test_laplace_mean_limit(self, L):
        """Test (1 - L(u))/u -> 1 for the mean-one standard laws"""
        assert laplace_mean_limit(L) == pytest.approx(1.0, abs=1e-5)

    def test_laplace_mean_limit_sequence(self):
        """Test u sequences must decrease"""
        with pytest.raises(ParameterError):
            laplace_mean_limit(exponential_transform(), [1e-3, 1e-2])

    def test_bgw_limit_of_geometric(self):
        """Test that geometric(1/2) offspring give an Exp(1) limit"""
        L = bgw_limit_transform(geometric(0.5))
        u = np.linspace(0.0, 10.0, 21)
        assert np.allclose(L(u), 1.0 / (1.0 + u), atol=1e-9)

    def test_bgw_limit_functional_equation(self):
        """Test phi(L(u)) = L(m u)"""
        family = binary_split()
        L = bgw_limit_transform(family)
        u = np.linspace(0.0, 10.0, 21)
        assert np.allclose(family(L(u)), L(1.5 * u), atol=1e-9)

    def test_bgw_limit_needs_supercritical_law(self):
        """Test mean one offspring"""
        with pytest.raises(ParameterError):
            bgw_limit_transform(constant_offspring(1))


@pytest.mark.validation
class TestContinuousTimeLimits:
    """Test cases for the inverse transform of continuous-time limits"""

    @pytest.mark.parametrize("s", [0.1, 0.5, 0.9, 0.999])
    def test_yule_inverse(self, s):
        """Test the Yule limit: L^-1(s) = (1 - s)/s"""
        assert ct_laplace_inverse(yule_H(), s) == pytest.approx((1.0 - s) / s, rel=1e-8)

    @pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
    def test_shifted_geometric_inverse(self, s):
        """Test the shifted-geometric limit: inverse of 2/(1 + sqrt(1 + 4u))"""
        assert ct_laplace_inverse(shifted_geom_H(), s) == pytest.approx((1.0 - s) / s**2, rel=1e-8)

    def test_inverse_at_one(self):
        """Test L^-1(1) = 0"""
        assert ct_laplace_inverse(yule_H(), 1.0) == 0.0

    def test_inverse_below_extinction(self):
        """Test s below the extinction probability 1/2"""
        with pytest.raises(DomainError):
            ct_laplace_inverse(theta_H(1.0, 0.5), 0.4)

    def test_infinite_mean(self):
        """Test the Neveu process has no mean-one limit"""
        with pytest.raises(DomainError):
            ct_laplace_inverse(neveu_H(), 0.5)

    def test_limit_transform_yule(self):
        """Test the numerically inverted Yule limit transform"""
        u = np.array([0.5, 2.0, 5.0])
        assert np.allclose(ct_limit_transform(yule_H())(u), 1.0 / (1.0 + u), atol=1e-8)

    def test_limit_transform_shifted_geometric(self):
        """Test against 2/(1 + sqrt(1 + 4u))"""
        u = np.array([0.5, 2.0, 5.0])
        assert np.allclose(ct_limit_transform(shifted_geom_H())(u), shifted_ml_transform()(u), atol=1e-8)

    def test_non_explosion(self):
        """Test the divergence check of int du/(u - h(u))"""
        assert non_explosive(yule_H())
        assert non_explosive(neveu_H())
        assert not non_explosive(theta_H(-0.5, 0.0))
