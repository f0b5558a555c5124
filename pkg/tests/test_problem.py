import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccopt.errors import DimensionMismatchError, OracleUnavailableError, ValidationError
from ccopt.problem import (
    AdmissibleBox,
    analytic_probability,
    analytic_probability_gradient,
    gaussian_noise,
    make_problem,
    project_admissible,
    project_dual,
    quintic_cdf,
    quintic_density,
    quintic_noise,
    quintic_quantile,
    sample_noise,
    solve_portfolio_saddle,
)
from conftest import PORTFOLIO_OPT

UNIT_BOX = AdmissibleBox(np.zeros(2), np.ones(2))


class TestProjections:
    def test_interior_point_fixed(self):
        assert np.allclose(project_admissible([0.5, 0.5], UNIT_BOX), [0.5, 0.5])

    def test_clamp_both_ends(self):
        assert np.allclose(project_admissible([-0.2, 1.3], UNIT_BOX), [0.0, 1.0])

    def test_one_sided_clamp(self):
        half = AdmissibleBox(np.array([0.0]), np.array([np.inf]))
        assert project_admissible([-3.0], half)[0] == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            project_admissible([0.1, 0.2, 0.3], UNIT_BOX)

    def test_dual_projection(self):
        assert np.allclose(project_dual([0.3, -0.1]), [0.3, 0.0])
        assert np.allclose(project_dual([0.0, 0.0]), [0.0, 0.0])
        assert project_dual([5.0], cap=2.0)[0] == 2.0

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=2),
        st.lists(st.floats(-10, 10), min_size=2, max_size=2),
    )
    @settings(max_examples=200, deadline=None)
    def test_box_projection_idempotent_nonexpansive(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        px, py = UNIT_BOX.project(x), UNIT_BOX.project(y)
        assert np.allclose(UNIT_BOX.project(px), px)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12

    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    )
    @settings(max_examples=200, deadline=None)
    def test_dual_projection_idempotent_nonexpansive(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        px, py = project_dual(x), project_dual(y)
        assert np.allclose(project_dual(px), px)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


class TestQuinticDistribution:
    def test_midpoint(self):
        assert quintic_cdf(0.4, 0.4, 3.0) == pytest.approx(0.5, abs=1e-15)

    def test_endpoints(self):
        assert quintic_cdf(0.4 - 3.0, 0.4, 3.0) == 0.0
        assert quintic_cdf(0.4 + 3.0, 0.4, 3.0) == 1.0
        assert quintic_cdf(-5.0, 0.4, 3.0) == 0.0
        assert quintic_cdf(9.0, 0.4, 3.0) == 1.0

    def test_half_scale_value(self):
        # t = 0.5: (3/32 - 10/8 + 15/2 + 8)/16
        assert quintic_cdf(1.9, 0.4, 3.0) == pytest.approx(0.896484375, abs=1e-15)

    def test_invalid_sigma(self):
        with pytest.raises(ValidationError):
            quintic_cdf(0.0, 0.0, -1.0)
        with pytest.raises(ValidationError):
            quintic_quantile(0.5, 0.0, 0.0)

    def test_quantile_endpoints_and_median(self):
        assert quintic_quantile(0.5, 0.4, 3.0) == pytest.approx(0.4, abs=1e-12)
        assert quintic_quantile(0.0, 0.4, 3.0) == -2.6
        assert quintic_quantile(1.0, 0.4, 3.0) == 3.4

    def test_quantile_roundtrip_value(self):
        assert quintic_quantile(0.896484375, 0.4, 3.0) == pytest.approx(1.9, abs=1e-10)

    def test_quantile_out_of_range(self):
        with pytest.raises(ValidationError):
            quintic_quantile(1.5, 0.4, 3.0)
        with pytest.raises(ValidationError):
            quintic_quantile(-0.1, 0.4, 3.0)

    def test_cdf_nondecreasing_and_roundtrip(self):
        rng = np.random.default_rng(0)
        xs = np.sort(rng.uniform(-2.6, 3.4, size=500))
        cdf = quintic_cdf(xs, 0.4, 3.0)
        assert np.all(np.diff(cdf) >= 0.0)
        back = quintic_quantile(cdf, 0.4, 3.0)
        assert np.max(np.abs(back - xs)) < 1e-10

    def test_density_integrates_to_cdf(self):
        from scipy.integrate import quad

        val, _ = quad(lambda x: quintic_density(x, 0.4, 3.0), -2.6, 1.9)
        assert val == pytest.approx(quintic_cdf(1.9, 0.4, 3.0), abs=1e-10)


class TestSampling:
    def test_determinism(self):
        model = quintic_noise()
        a = sample_noise(model, np.random.default_rng(123), size=10)
        b = sample_noise(model, np.random.default_rng(123), size=10)
        assert np.array_equal(a, b)

    def test_empirical_mean_and_support(self):
        model = quintic_noise(0.4, 3.0)
        draws = sample_noise(model, np.random.default_rng(42), size=1_000_000)
        assert abs(draws.mean() - 0.4) < 0.01
        assert draws.min() >= -2.6 and draws.max() <= 3.4

    def test_gaussian_moments(self):
        model = gaussian_noise(-2.0, 0.1)
        draws = sample_noise(model, np.random.default_rng(7), size=200_000)
        assert draws.mean() == pytest.approx(-2.0, abs=0.002)
        assert draws.std() == pytest.approx(0.1, abs=0.002)


class TestPortfolioInstance:
    def test_constraint_value(self, portfolio):
        theta = portfolio.constraint(np.array([0.0, 0.50407]), 0.4)
        assert theta == pytest.approx(0.444302, abs=1e-9)

    def test_discontinuity_locus(self, portfolio):
        # theta vanishes for every xi once the safe asset covers the debt
        u_star = 1.15 / 1.2
        for xi in (-2.0, 0.4, 3.0):
            assert portfolio.constraint(np.array([u_star, 0.0]), xi) == pytest.approx(0.0, abs=1e-12)

    def test_cost_grad_matches_central_differences(self, portfolio):
        u = np.array([0.2, 0.8])
        xi = 0.0
        g = portfolio.cost_grad(u, xi)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            num = (portfolio.cost(u + e, xi) - portfolio.cost(u - e, xi)) / (2 * h)
            assert g[j] == pytest.approx(num, abs=1e-8)

    def test_probability_at_optimum(self, portfolio):
        # the reported optimum is only printed to 5 decimals, hence 1e-4
        assert analytic_probability(portfolio, PORTFOLIO_OPT) == pytest.approx(0.24, abs=1e-4)

    def test_probability_discontinuity(self, portfolio):
        assert analytic_probability(portfolio, [0.96, 0.0]) == 1.0
        assert analytic_probability(portfolio, [0.95, 0.0]) == 0.0

    def test_probability_gradient_at_optimum(self, portfolio):
        grad = analytic_probability_gradient(portfolio, PORTFOLIO_OPT)
        assert grad[0] == pytest.approx(0.62, abs=5e-3)
        assert grad[1] == pytest.approx(1.18, abs=5e-3)

    def test_gradient_undefined_at_degenerate_edge(self, portfolio):
        with pytest.raises(OracleUnavailableError):
            analytic_probability_gradient(portfolio, [0.5, 0.0])

    def test_gradient_matches_central_differences(self, portfolio):
        rng = np.random.default_rng(5)
        h = 1e-6
        for _ in range(10):
            u = rng.uniform([0.0, 0.2], [0.6, 0.9])
            grad = analytic_probability_gradient(portfolio, u)
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                num = (
                    analytic_probability(portfolio, u + e)
                    - analytic_probability(portfolio, u - e)
                ) / (2 * h)
                if abs(num) > 1e-8:
                    assert grad[j] == pytest.approx(num, rel=1e-5)

    def test_probability_in_unit_interval(self, portfolio):
        rng = np.random.default_rng(11)
        for _ in range(50):
            u = rng.uniform([0, 0], [1, 1])
            assert 0.0 <= analytic_probability(portfolio, u) <= 1.0

    def test_probability_matches_monte_carlo(self, portfolio):
        rng = np.random.default_rng(202)
        n = 100_000
        for _ in range(5):
            u = rng.uniform([0.0, 0.1], [0.8, 0.9])
            draws = sample_noise(portfolio.noise, rng, size=n)
            hits = np.array(
                [1.15 - 1.2 * u[0] - (1.0 + draws) * u[1] <= 0.0]
            ).mean()
            p = analytic_probability(portfolio, u)
            se = max(np.sqrt(p * (1 - p) / n), 1e-4)
            assert abs(hits - p) <= 3 * se

    def test_reference_saddle_matches_reported_values(self, portfolio):
        u_opt, lam_opt = portfolio.reference_saddle
        assert u_opt[0] == 0.0
        assert u_opt[1] == pytest.approx(0.50407, abs=1e-5)
        assert lam_opt[0] == 0.0
        assert lam_opt[1] == pytest.approx(0.08815, abs=1e-5)

    def test_saddle_solver_rejects_other_problems(self, toy):
        with pytest.raises(ValidationError):
            solve_portfolio_saddle(toy)


class TestToyInstance:
    def test_unconstrained_minimizer(self, toy):
        assert toy.cost_grad(np.array([1.0]), 0.0)[0] == 0.0

    def test_probability_at_mean(self, toy):
        assert analytic_probability(toy, [-2.0]) == pytest.approx(0.5, abs=1e-12)

    def test_probability_at_reported_optimum(self, toy):
        assert analytic_probability(toy, [-2.05244]) == pytest.approx(0.7, abs=1e-5)

    def test_gradient_value(self, toy):
        from scipy.stats import norm

        grad = analytic_probability_gradient(toy, [-2.0])
        assert grad[0] == pytest.approx(-norm.pdf(0.0) / 0.1, abs=1e-9)

    def test_reference_saddle(self, toy):
        u_opt, lam_opt = toy.reference_saddle
        assert u_opt[0] == pytest.approx(-2.05244, abs=1e-4)
        assert lam_opt[0] == pytest.approx(0.877913, abs=1e-4)


class TestFactory:
    def test_unknown_problem(self):
        with pytest.raises(ValidationError):
            make_problem("nonsense")

    def test_unknown_override(self):
        with pytest.raises(ValidationError):
            make_problem("toy", sigma=2.0)

    def test_override_applies(self):
        p = make_problem("portfolio", pi=0.3)
        assert p.prob_level == 0.3

    def test_invalid_level(self):
        with pytest.raises(ValidationError):
            make_problem("toy", pi=1.5)
