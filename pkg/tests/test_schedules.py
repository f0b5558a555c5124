from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccopt.errors import ValidationError
from ccopt.schedules import (
    SmoothingSchedule,
    StepSchedule,
    check_conditions_ac,
    check_conditions_fd,
    evaluate_schedules,
    optimal_tuning,
    predict_rate,
    variance_exponent,
)


class TestConditionCheckers:
    def test_ac_reference_pair_passes(self):
        assert check_conditions_ac(1, Fraction(2, 5)).passed

    def test_ac_small_gamma_fails_sum(self):
        report = check_conditions_ac(0.5, 0.4)
        assert not report.passed
        assert any("beta + gamma" in v for v in report.violations)

    def test_ac_large_beta_fails_variance_condition(self):
        report = check_conditions_ac(1, 2.5)
        assert not report.passed
        assert any("beta/2" in v for v in report.violations)

    def test_fd_h4_reference_pair_passes(self):
        assert check_conditions_fd(1, Fraction(4, 11), "H4").passed

    def test_fd_worst_case_reference_pair_passes(self):
        assert check_conditions_fd(1, Fraction(1, 3), "none").passed

    def test_fd_worst_case_rejects_large_beta(self):
        report = check_conditions_fd(1, 1.1, "none")
        assert not report.passed
        assert any("2*gamma - beta" in v for v in report.violations)

    def test_unknown_hypothesis(self):
        with pytest.raises(ValidationError):
            check_conditions_fd(1, 0.4, "H9")

    def test_nonpositive_exponents_rejected(self):
        with pytest.raises(ValidationError):
            check_conditions_ac(0, 0.4)

    def test_gamma_above_one_fails(self):
        assert not check_conditions_ac(1.2, 0.4).passed

    @given(st.fractions(min_value="1/10", max_value="1", max_denominator=20),
           st.fractions(min_value="1/10", max_value="3", max_denominator=20))
    @settings(max_examples=300, deadline=None)
    def test_enlarging_gamma_never_breaks_a_pass(self, gamma, beta):
        if check_conditions_ac(gamma, beta).passed:
            assert check_conditions_ac(Fraction(1), beta).passed


class TestRatePrediction:
    def test_ac_optimum_is_exact(self):
        t = optimal_tuning("ac")
        assert (t.gamma, t.beta, t.kappa) == (Fraction(1), Fraction(2, 5), Fraction(4, 5))
        assert t.delta == Fraction(-1, 5)

    def test_fd_h4_optimum_is_exact(self):
        t = optimal_tuning("fd", "H4")
        assert (t.beta, t.kappa) == (Fraction(4, 11), Fraction(8, 11))

    def test_fd_worst_optimum_is_exact(self):
        t = optimal_tuning("fd", "none")
        assert (t.beta, t.kappa) == (Fraction(1, 3), Fraction(2, 3))

    def test_balancing_holds_at_each_optimum(self):
        for kind, hyp in (("ac", "H3"), ("fd", "H3"), ("fd", "H4"), ("fd", "none")):
            t = optimal_tuning(kind, hyp)
            assert 2 * t.beta == t.gamma + t.delta

    def test_optimum_passes_own_checker(self):
        for kind, hyp in (("ac", "H3"), ("fd", "H3"), ("fd", "H4"), ("fd", "none")):
            t = optimal_tuning(kind, hyp)
            checker = check_conditions_ac if kind == "ac" else (
                lambda g, b: check_conditions_fd(g, b, hyp)
            )
            assert checker(t.gamma, t.beta).passed

    def test_perturbing_beta_degrades_rate(self):
        for kind, hyp in (("ac", "H3"), ("fd", "H4"), ("fd", "none")):
            t = optimal_tuning(kind, hyp)
            for shift in (-0.05, 0.05):
                beta = float(t.beta) + shift
                perturbed = predict_rate(1.0, beta, kind, hyp)
                assert float(perturbed.kappa) < float(t.kappa) - 1e-9

    def test_small_beta_is_bias_limited(self):
        t = predict_rate(1, 0.2, "ac")
        assert float(t.kappa) == pytest.approx(0.4)

    def test_prediction_requires_valid_conditions(self):
        with pytest.raises(ValidationError):
            predict_rate(0.5, 0.4, "ac")

    def test_variance_exponents(self):
        assert variance_exponent(Fraction(2, 5), "ac") == Fraction(-1, 5)
        assert variance_exponent(Fraction(2, 5), "fd", "H3") == Fraction(-1, 5)
        assert variance_exponent(Fraction(4, 11), "fd", "H4") == Fraction(-3, 11)
        assert variance_exponent(Fraction(1, 3), "fd", "none") == Fraction(-1, 3)


class TestScheduleEvaluation:
    def test_simple_step_value(self):
        eps, rho, s = evaluate_schedules(
            StepSchedule(1.0, 0.0), SmoothingSchedule(1.30, 0.2), 10
        )
        assert eps == pytest.approx(0.1)
        assert rho == pytest.approx(0.1)

    def test_smoothing_at_first_iteration(self):
        _, _, s = evaluate_schedules(StepSchedule(1.0), SmoothingSchedule(1.30, 0.2), 1)
        assert s == pytest.approx(1.30)

    def test_difference_step_scaling(self):
        _, _, s = evaluate_schedules(StepSchedule(1.0), SmoothingSchedule(0.63, 0.2), 32)
        assert s == pytest.approx(0.63 * 32 ** -0.2, abs=1e-12)
        assert s == pytest.approx(0.315, abs=1e-12)

    def test_separate_dual_schedule(self):
        eps, rho, _ = evaluate_schedules(
            StepSchedule(2.0, 0.0), SmoothingSchedule(1.0, 0.2), 4, dual_step=StepSchedule(1.0, 4.0)
        )
        assert eps == pytest.approx(0.5)
        assert rho == pytest.approx(0.125)

    def test_rejects_index_below_one(self):
        with pytest.raises(ValidationError):
            evaluate_schedules(StepSchedule(1.0), SmoothingSchedule(1.0, 0.2), 0)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValidationError):
            StepSchedule(0.0)
        with pytest.raises(ValidationError):
            StepSchedule(1.0, -1.0)
        with pytest.raises(ValidationError):
            SmoothingSchedule(-1.0, 0.2)

    def test_step_sums_diverge_and_squares_converge(self):
        for d, e in ((1.0, 0.0), (0.5, 7.0), (3.0, 100.0)):
            sched = StepSchedule(d, e)
            ks = np.arange(1, 1_000_001)
            eps = d / (e + ks)
            partial = np.cumsum(eps)
            # divergence: the partial sums keep growing without leveling off
            assert partial[-1] > partial[len(partial) // 10] + 1.0
            # square-summability: the tail contributes negligibly
            sq = np.cumsum(eps**2)
            assert sq[-1] - sq[100_000 - 1] < 1e-4 * d**2 + 1e-6
            assert sched.value(10) == pytest.approx(d / (e + 10))
