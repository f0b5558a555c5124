"""Stochastic primal-dual optimization under probability constraints.

The package solves problems of the form

    min E[ j(u, xi) ]   s.t.  P( theta(u, xi) <= alpha ) >= pi

by a projected stochastic saddle-point iteration whose probability-gradient
estimates come either from kernel smoothing of the indicator or from
symmetric indicator differences.  Exact-expectation analysis tools
(bias/variance quadrature, smoothing-rule tuning, mean-field ODE study,
saddle linearization) and a replicated experiment harness round it out.
"""

from .errors import (
    DimensionMismatchError,
    DivergenceError,
    OracleUnavailableError,
    ValidationError,
)
from .kernels import MollifierKernel, best_kernel, builtin_kernels, kernel_by_name, kernel_score
from .problem import (
    AdmissibleBox,
    ChanceConstrainedProblem,
    NoiseModel,
    analytic_probability,
    analytic_probability_gradient,
    gaussian_noise,
    make_portfolio_problem,
    make_problem,
    make_toy_problem,
    project_admissible,
    project_dual,
    quintic_cdf,
    quintic_noise,
    quintic_quantile,
    sample_noise,
    solve_portfolio_saddle,
)
from .estimators import (
    EstimatorConfig,
    ac_gradient_estimate,
    ac_probability_estimate,
    fd_gradient_estimate,
    indicator_estimate,
)
from .schedules import (
    ConditionReport,
    RateTuning,
    ScheduleSet,
    SmoothingSchedule,
    StepSchedule,
    check_conditions_ac,
    check_conditions_fd,
    evaluate_schedules,
    optimal_tuning,
    predict_rate,
)
from .solver import (
    IterateState,
    RunConfig,
    Trajectory,
    arrow_hurwicz_step,
    kt_residual,
    run,
    solve_toy_deterministic,
)
from .analysis import (
    BiasVarianceReport,
    bias_variance_oracle,
    clt_diagnostics,
    fit_estimator_constants,
    indicator_mean_oracle,
    linearize,
    mean_field,
    ode_integrate,
    optimal_smoothing,
)
from .harness import (
    AggregateSeries,
    ExperimentConfig,
    ExperimentResult,
    emit_csv,
    emit_plot_script,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"
