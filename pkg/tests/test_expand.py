from __future__ import annotations

import json

import numpy as np
import pytest

import perturbex as px
from perturbex.errors import MissingThirdDerivative, PreconditionViolated

_I1 = px.spd_from_dense(np.eye(1))


def _cubic_1d():
    return px.CustomOracle(
        dim=1,
        value=lambda x: 0.5 * float(x[0]) ** 2 + float(x[0]) ** 3 / 6.0,
        gradient=lambda x: np.array([float(x[0]) + 0.5 * float(x[0]) ** 2]),
        hessian=lambda x: np.array([[1.0 + float(x[0])]]),
        third_dir=lambda x, u: np.array([float(u[0]) ** 2]),
        fourth_dir=lambda x, u: np.array([0.0]),
    )


class TestExactQuadratic:
    def test_frozen_two_by_two(self):
        # F = diag(2, 4), A = (1, 2): shift -F^{-1}A = (-1/2, -1/2) and
        # value -||F^{-1/2}A||^2/2 = -(1/2 + 1)/2 = -3/4.
        F = px.spd_from_dense(np.diag([2.0, 4.0]))
        rep = px.exact_quadratic_expansion(F, np.array([1.0, 2.0]))
        np.testing.assert_allclose(rep.predicted_shift, [-0.5, -0.5], atol=1e-15)
        assert rep.predicted_value_change == pytest.approx(-0.75, abs=1e-15)
        assert all(b.radius == 0.0 for b in rep.bounds.shift_bounds)
        assert rep.bounds.value_bound.lower == 0.0 == rep.bounds.value_bound.upper

    def test_verified_against_solver(self, rng):
        F = px.random_spd(rng, 6, cond=40.0)
        center = rng.standard_normal(6)
        f = px.QuadraticOracle(F, center)
        A = rng.standard_normal(6)
        rep = px.exact_quadratic_expansion(F, A)
        comp = px.verify_expansion(f, center, A, rep)
        assert comp.certifying
        assert comp.violations == []
        assert comp.max_certified_slack == 0.0

    def test_mixed_term_is_exchangeable(self, rng):
        """v(A+B) - v(A) - v(B) equals -<A, F^{-1}B> = -<B, F^{-1}A>."""
        F = px.random_spd(rng, 4, cond=9.0)
        A = rng.standard_normal(4)
        B = rng.standard_normal(4)
        v = lambda t: px.exact_quadratic_expansion(F, t).predicted_value_change
        cross = v(A + B) - v(A) - v(B)
        assert cross == pytest.approx(-float(A @ F.apply_power(-1.0, B)), rel=1e-12)
        assert cross == pytest.approx(-float(B @ F.apply_power(-1.0, A)), rel=1e-12)


class TestConcentration:
    def test_radii_and_gates(self):
        F = px.spd_from_dense(np.eye(2))
        bounds = px.concentration_certificate(
            F, np.eye(2), np.array([0.3, 0.0]), nu=0.5, r=1.0, kappa=1.0, delta2=0.2
        )
        assert bounds.all_gates_pass
        by_name = {b.name: b.radius for b in bounds.shift_bounds}
        assert by_name == {"shift_fhalf": 1.0, "shift_d": 1.0}

    def test_tilt_fraction_gate_fails_for_large_tilt(self):
        F = px.spd_from_dense(np.eye(2))
        bounds = px.concentration_certificate(
            F, np.eye(2), np.array([0.9, 0.0]), nu=0.5, r=1.0, kappa=1.0, delta2=0.2
        )
        assert not bounds.gate("tilt_fraction").satisfied
        assert bounds.gate("nu_below_one").satisfied

    def test_stability_margin_is_strict(self):
        F = px.spd_from_dense(np.eye(2))
        bounds = px.concentration_certificate(
            F, np.eye(2), np.array([0.1, 0.0]), nu=0.5, r=1.0, kappa=1.0, delta2=0.5
        )
        # delta2 * kappa^2 = 0.5 equals 1 - nu: strict comparison fails.
        assert not bounds.gate("stability_margin").satisfied


class TestSecondOrder:
    """Frozen example: omega = 0.2, kappa = 1, b = xi = 1, radius 2."""

    def _bounds(self):
        cert = px.declared_certificate(_I1, radius=2.0, kappa=1.0, omega=0.2)
        return px.second_order_bounds(_I1, _I1, np.array([1.0]), cert)

    def test_gates_all_pass(self):
        assert self._bounds().all_gates_pass

    def test_newton_radius(self):
        # 2 sqrt(0.2) / (1 - 0.2) = sqrt(5)/2.
        bounds = self._bounds()
        newton = next(b for b in bounds.shift_bounds if b.name == "newton_residual_d")
        assert newton.radius == pytest.approx(np.sqrt(5.0) / 2.0, rel=1e-14)

    def test_shift_radius(self):
        bounds = self._bounds()
        shift = next(b for b in bounds.shift_bounds if b.name == "shift_d")
        assert shift.radius == pytest.approx((1 + 2 * np.sqrt(0.2)) / 0.8, rel=1e-14)

    def test_value_bracket_is_asymmetric(self):
        vb = self._bounds().value_bound
        assert vb.lower == pytest.approx(-0.125, abs=1e-15)  # -0.2 / (2 * 0.8)
        assert vb.upper == pytest.approx(1.0 / 12.0, rel=1e-14)  # 0.2 / (2 * 1.2)

    def test_omega_cap_gate(self):
        cert = px.declared_certificate(_I1, radius=2.0, kappa=1.0, omega=0.4)
        bounds = px.second_order_bounds(_I1, _I1, np.array([0.1]), cert)
        assert not bounds.gate("omega_cap").satisfied


class TestThirdOrder:
    def test_frozen_radii(self):
        """tau3 = 0.4, b = xi = 1: newton radius 0.3, value half-width 0.1."""
        cert = px.declared_certificate(
            _I1, radius=2.0, kappa=1.0, omega=0.0, tau3=0.4
        )
        bounds = px.third_order_bounds(_I1, _I1, np.array([1.0]), cert)
        by_name = {b.name: b.radius for b in bounds.shift_bounds}
        assert by_name["newton_residual_dinvf"] == pytest.approx(0.3, rel=1e-14)
        assert by_name["shift_d"] == pytest.approx(1.5, rel=1e-14)
        assert by_name["shift_fhalf"] == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert by_name["shift_d_wide"] == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert bounds.value_bound.upper == pytest.approx(0.1, rel=1e-14)
        # At b = 1 the curvature-ball tensor gate 0.4 < 1/4 fails while the
        # metric-ball gate 0.4 < 4/9 still holds.
        assert not bounds.gate("tau3_fnorm").satisfied
        assert bounds.gate("tau3_dnorm").satisfied

    def test_small_tilt_passes_all_gates(self):
        cert = px.declared_certificate(
            _I1, radius=2.0, kappa=1.0, omega=0.0, tau3=0.4
        )
        bounds = px.third_order_bounds(_I1, _I1, np.array([0.5]), cert)
        assert bounds.all_gates_pass
        newton = next(
            b for b in bounds.shift_bounds if b.name == "newton_residual_dinvf"
        )
        assert newton.radius == pytest.approx(0.075, rel=1e-14)

    def test_requires_tau3(self):
        cert = px.declared_certificate(_I1, radius=1.0, kappa=1.0, omega=0.1)
        with pytest.raises(MissingThirdDerivative):
            px.third_order_bounds(_I1, _I1, np.array([0.1]), cert)


class TestSkewness:
    def test_pure_cubic(self):
        """f = x^3 has constant third derivative 6: T(1) = 1, gradT(1) = 3."""
        f = px.CustomOracle(
            dim=1,
            value=lambda x: float(x[0]) ** 3,
            gradient=lambda x: np.array([3.0 * float(x[0]) ** 2]),
            hessian=lambda x: np.array([[6.0 * float(x[0])]]),
            third_dir=lambda x, u: np.array([6.0 * float(u[0]) ** 2]),
        )
        T, gradT = px.skewness_correction(f, np.zeros(1), np.array([1.0]))
        assert T == pytest.approx(1.0, abs=1e-15)
        assert gradT[0] == pytest.approx(3.0, abs=1e-15)

    def test_T_is_odd_gradT_is_even(self, logistic_anchor):
        f, xstar = logistic_anchor
        u = 0.1 * np.arange(1.0, f.dim + 1)
        T1, g1 = px.skewness_correction(f, xstar, u)
        T2, g2 = px.skewness_correction(f, xstar, -u)
        assert T2 == -T1
        np.testing.assert_array_equal(g1, g2)


class TestFourthOrder:
    def test_frozen_radii_with_declared_constants(self):
        """tau3 = 0.4, tau4 = 0.3, b = 1: skew radius 0.31, value 0.2136."""
        f = px.QuadraticOracle(_I1, np.zeros(1))  # zero tensors, pure formulas
        cert = px.declared_certificate(
            _I1, radius=2.0, kappa=1.0, omega=0.0, tau3=0.4, tau4=0.3
        )
        rep = px.fourth_order_expansion(f, np.zeros(1), _I1, _I1, np.array([1.0]), cert)
        assert rep.bounds.all_gates_pass
        skew = next(
            b for b in rep.bounds.shift_bounds if b.name == "skew_residual_dinvf"
        )
        assert skew.radius == pytest.approx(0.31, rel=1e-12)
        assert rep.bounds.value_bound.upper == pytest.approx(0.2136, rel=1e-12)
        np.testing.assert_array_equal(rep.skew_correction, np.zeros(1))

    def test_cubic_correction_is_computed_exactly(self):
        """For f = x^2/2 + x^3/6 and A = 1: u0 = 1, T = 1/6, skew = -1/2."""
        f = _cubic_1d()
        cert = px.declared_certificate(
            _I1, radius=2.0, kappa=1.0, omega=1.0, tau3=1.0, tau4=0.0
        )
        rep = px.fourth_order_expansion(f, np.zeros(1), _I1, _I1, np.array([1.0]), cert)
        assert rep.skew_correction[0] == pytest.approx(-0.5, abs=1e-15)
        assert rep.predicted_shift[0] == pytest.approx(-1.5, abs=1e-15)
        assert rep.predicted_value_change == pytest.approx(-0.5 - 1.0 / 6.0, abs=1e-15)

    def test_prediction_is_antisymmetric_about_the_skew(self, logistic_certificate):
        """shift(A) + shift(-A) = 2 * skew(A): the Newton parts cancel exactly."""
        f, xstar, F, cert = logistic_certificate
        A = 0.02 * np.arange(1.0, f.dim + 1)
        plus = px.fourth_order_expansion(f, xstar, F, cert.metric, A, cert)
        minus = px.fourth_order_expansion(f, xstar, F, cert.metric, -A, cert)
        np.testing.assert_allclose(
            plus.predicted_shift + minus.predicted_shift,
            2.0 * plus.skew_correction,
            atol=1e-15,
        )

    def test_tau4_gate(self):
        f = px.QuadraticOracle(_I1, np.zeros(1))
        cert = px.declared_certificate(
            _I1, radius=2.0, kappa=1.0, omega=0.0, tau3=0.1, tau4=0.5
        )
        rep = px.fourth_order_expansion(f, np.zeros(1), _I1, _I1, np.array([1.0]), cert)
        assert not rep.bounds.gate("tau4_dnorm").satisfied


class TestDispatch:
    def test_unknown_order(self, logistic_certificate):
        f, xstar, F, cert = logistic_certificate
        with pytest.raises(ValueError):
            px.expansion_for_order(f, xstar, F, cert.metric, np.zeros(f.dim), cert, 5)

    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_order_tag_matches(self, order, logistic_certificate):
        f, xstar, F, cert = logistic_certificate
        A = 0.01 * np.ones(f.dim)
        rep = px.expansion_for_order(f, xstar, F, cert.metric, A, cert, order)
        assert rep.order == str(order)
        assert rep.anchor == "base-minimizer"


class TestVerification:
    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_logistic_orders_certify_with_slack(self, order, logistic_certificate):
        f, xstar, F, cert = logistic_certificate
        rng = np.random.default_rng(17)
        v = rng.standard_normal(f.dim)
        A = 0.02 * v / np.linalg.norm(v)
        rep = px.expansion_for_order(f, xstar, F, cert.metric, A, cert, order)
        comp = px.verify_expansion(f, xstar, A, rep)
        assert comp.certifying, rep.bounds.failed_gates()
        assert comp.violations == []
        assert comp.max_certified_slack <= 1.0

    def test_zero_tilt_has_zero_slack(self, logistic_certificate):
        f, xstar, F, cert = logistic_certificate
        A = np.zeros(f.dim)
        rep = px.expansion_for_order(f, xstar, F, cert.metric, A, cert, 3)
        comp = px.verify_expansion(f, xstar, A, rep)
        assert comp.violations == []
        assert comp.max_certified_slack == 0.0

    def test_false_certificate_is_caught(self):
        """A deliberately tiny tau3 yields radii the truth must violate."""
        f = _cubic_1d()
        lying = px.declared_certificate(
            _I1, radius=1.0, kappa=1.0, omega=0.5, tau3=1e-6, tau4=0.0
        )
        A = np.array([0.3])
        rep = px.expansion_for_order(f, np.zeros(1), _I1, _I1, A, lying, 3)
        assert rep.bounds.all_gates_pass  # the lie makes every gate easy
        comp = px.verify_expansion(f, np.zeros(1), A, rep)
        assert "newton_residual_dinvf" in comp.violations

    def test_uncertified_bounds_never_raise_violations(self):
        """Failed gates exclude a bound from the violation list."""
        f = _cubic_1d()
        cert = px.declared_certificate(
            _I1, radius=0.1, kappa=1.0, omega=0.5, tau3=1e-6, tau4=0.0
        )
        A = np.array([0.3])  # dnorm_radius gate fails: 0.45 > 0.1
        rep = px.expansion_for_order(f, np.zeros(1), _I1, _I1, A, cert, 3)
        assert not rep.bounds.all_gates_pass
        comp = px.verify_expansion(f, np.zeros(1), A, rep)
        assert not comp.certifying
        assert comp.violations == []

    def test_report_roundtrips_through_json(self, logistic_certificate):
        f, xstar, F, cert = logistic_certificate
        A = 0.02 * np.ones(f.dim)
        rep = px.expansion_for_order(f, xstar, F, cert.metric, A, cert, 4)
        comp = px.verify_expansion(f, xstar, A, rep)
        blob = json.dumps({"report": rep.to_dict(), "verification": comp.to_dict()})
        parsed = json.loads(blob)
        assert parsed["report"]["order"] == "4"
        assert set(parsed["verification"]["slack_ratios"]) >= {"shift_d", "value"}


class TestDistanceToOptimum:
    def test_prediction_covers_true_distance(self, logistic_certificate):
        f, xstar, _, cert = logistic_certificate
        xk = xstar + 0.05 * np.random.default_rng(1).standard_normal(f.dim)
        rep = px.distance_to_optimum(f, xk, cert)
        assert rep.anchor == "iterate"
        assert rep.bounds.all_gates_pass
        shift_d = next(b for b in rep.bounds.shift_bounds if b.name == "shift_d")
        true_dist = px.weighted_norm(cert.metric, xstar - xk)
        assert true_dist <= shift_d.radius
        # The Newton step from xk lands much closer than xk started.
        landed = np.linalg.norm(xk + rep.predicted_shift - xstar)
        assert landed < 0.05 * np.linalg.norm(xk - xstar)

    def test_at_the_minimizer_everything_vanishes(self, logistic_certificate):
        f, xstar, _, cert = logistic_certificate
        rep = px.distance_to_optimum(f, xstar, cert)
        assert np.linalg.norm(rep.predicted_shift) < 1e-10


class TestCubicBoundCheck:
    def _ball_instance(self, seed=0, dim=3):
        rng = np.random.default_rng(seed)
        U = px.random_spd(rng, dim, cond=4.0)
        # Lift the spectrum above 1 as the check requires.
        U = px.spd_from_dense(U.matrix + (1.0 - U.eigenvalues[-1] + 0.3) * np.eye(dim))
        s = rng.standard_normal(dim)
        s *= 0.85 / np.linalg.norm(s)
        return U, s

    def test_generic_instance_passes(self):
        U, s = self._ball_instance()
        record = px.cubic_bound_check(U, s, tau=0.25, r=1.0, samples=30_000, seed=1)
        assert record.passed
        assert {c.name for c in record.checks} == {"max_envelope", "min_envelope"}

    def test_tau_zero_reduces_to_quadratic_identity(self):
        U, s = self._ball_instance(seed=2)
        record = px.cubic_bound_check(U, s, tau=0.0, r=1.0, samples=5_000, seed=3)
        assert record.passed
        for check in record.checks:
            assert check.worst_ratio <= 1.0

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda U, s: (U, 0.5 * s),  # anchor below (3/4) r
            lambda U, s: (U, 1.5 * s),  # anchor outside the ball
            lambda U, s: (px.spd_from_dense(0.5 * U.matrix), s),  # spectrum below 1
        ],
    )
    def test_preconditions_raise(self, mutate):
        U, s = self._ball_instance(seed=4)
        U2, s2 = mutate(U, s)
        with pytest.raises(PreconditionViolated):
            px.cubic_bound_check(U2, s2, tau=0.25, r=1.0, samples=100, seed=5)

    def test_large_tau_radius_product_raises(self):
        U, s = self._ball_instance(seed=6)
        with pytest.raises(PreconditionViolated):
            px.cubic_bound_check(U, s, tau=0.5, r=1.0, samples=100, seed=7)

    def test_deterministic_in_seed(self):
        U, s = self._ball_instance(seed=8)
        r1 = px.cubic_bound_check(U, s, tau=0.2, r=1.0, samples=2_000, seed=9)
        r2 = px.cubic_bound_check(U, s, tau=0.2, r=1.0, samples=2_000, seed=9)
        assert r1.to_dict() == r2.to_dict()
