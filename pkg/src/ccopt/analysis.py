"""Exact-expectation analysis tools.

Everything here integrates over the scalar noise with adaptive
Gauss-Kronrod quadrature, splitting the axis at the points where the
estimator integrands lose smoothness (the noise values where the
constraint crosses the threshold or the edge of the smoothing window).
On top of that sit:

  * a bias/variance oracle for the gradient estimators,
  * extraction of the variance and bias constants and the resulting
    smoothing rule s* = (A / (4 B^2 N))^(1/5),
  * the mean-field drift and a projected Runge-Kutta integrator for the
    associated ODE,
  * the saddle-point linearization with its eigenvalue stability check,
  * empirical scaling diagnostics across replicated runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .errors import OracleUnavailableError, ValidationError
from .estimators import EstimatorConfig, gradient_estimate, indicator_estimate
from .problem import ChanceConstrainedProblem, analytic_probability_gradient
from .solver import IterateState

__all__ = [
    "BiasVarianceReport",
    "bias_variance_oracle",
    "indicator_mean_oracle",
    "EstimatorConstants",
    "fit_estimator_constants",
    "optimal_smoothing",
    "mean_field",
    "OdePath",
    "ode_integrate",
    "LinearizationReport",
    "linearize",
    "CltSummary",
    "clt_diagnostics",
]

_GAUSS_TAIL = 10.0  # truncation of unbounded noise, in standard deviations
_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=400)


# ---------------------------------------------------------------------------
# quadrature over the noise

def _noise_interval(problem: ChanceConstrainedProblem) -> tuple[float, float]:
    lo, hi = problem.noise.support()
    if not np.isfinite(lo):
        lo = problem.noise.location - _GAUSS_TAIL * problem.noise.scale
    if not np.isfinite(hi):
        hi = problem.noise.location + _GAUSS_TAIL * problem.noise.scale
    return float(lo), float(hi)


def noise_expectation(
    problem: ChanceConstrainedProblem,
    fn: Callable[[float], float],
    breakpoints: Sequence[float] = (),
) -> float:
    """integral of fn(xi) q(xi) d xi over the noise support."""
    lo, hi = _noise_interval(problem)
    pts = sorted(p for p in breakpoints if lo < p < hi)
    density = problem.noise.density
    val, _ = integrate.quad(
        lambda x: fn(x) * density(x), lo, hi, points=pts or None, **_QUAD_OPTS
    )
    return val


def constraint_crossings(
    problem: ChanceConstrainedProblem, u, levels: Sequence[float], grid: int = 512
) -> list[float]:
    """All noise values where theta(u, .) hits one of the given levels.

    A sign-change scan on a dense grid bracket the roots, refined by Brent
    iteration; exact grid hits are kept as-is.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo, hi = _noise_interval(problem)
    xs = np.linspace(lo, hi, grid + 1)
    theta = np.array([problem.constraint(u, x) for x in xs])
    roots: list[float] = []
    for level in levels:
        vals = theta - level
        for i in range(grid):
            a, b = vals[i], vals[i + 1]
            if a == 0.0:
                roots.append(xs[i])
            elif a * b < 0.0:
                roots.append(
                    optimize.brentq(
                        lambda x: problem.constraint(u, x) - level,
                        xs[i],
                        xs[i + 1],
                        xtol=1e-14,
                        rtol=8.9e-16,
                    )
                )
        if vals[-1] == 0.0:
            roots.append(xs[-1])
    return sorted(roots)


# ---------------------------------------------------------------------------
# bias / variance oracle

@dataclass(frozen=True)
class BiasVarianceReport:
    """Exact per-component moments of a gradient estimator at fixed u.

    mqe aggregates over components: sum(variance)/n_samples + sum(bias^2).
    """

    smoothing: float
    n_samples: int
    mean: np.ndarray
    variance: np.ndarray
    bias: np.ndarray
    mqe: float

    @property
    def second_moment(self) -> np.ndarray:
        return self.variance + self.mean**2


def _component_breakpoints(
    problem: ChanceConstrainedProblem, u, cfg: EstimatorConfig, j: int
) -> list[float]:
    alpha = problem.threshold
    if cfg.kind == "ac":
        r = cfg.smoothing
        return constraint_crossings(problem, u, [alpha - r, alpha, alpha + r])
    c = cfg.smoothing
    u = np.atleast_1d(np.asarray(u, dtype=float))
    pts: list[float] = []
    for sign in (+1.0, -1.0):
        shifted = u.copy()
        shifted[j] += sign * c
        pts.extend(constraint_crossings(problem, shifted, [alpha]))
    return sorted(pts)


def bias_variance_oracle(
    problem: ChanceConstrainedProblem,
    estimator: EstimatorConfig,
    u,
    smoothing: float,
    n_samples: int = 1,
) -> BiasVarianceReport:
    """Quadrature mean/variance of the configured gradient estimator at u,
    with bias measured against the closed-form probability gradient."""
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    cfg = estimator.with_smoothing(smoothing)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    exact = analytic_probability_gradient(problem, u)

    mean = np.zeros(problem.dim_u)
    second = np.zeros(problem.dim_u)
    for j in range(problem.dim_u):
        pts = _component_breakpoints(problem, u, cfg, j)

        def comp(xi, j=j):
            return float(gradient_estimate(problem, u, xi, cfg)[j])

        mean[j] = noise_expectation(problem, comp, pts)
        second[j] = noise_expectation(problem, lambda x, j=j: comp(x) ** 2, pts)

    variance = second - mean**2
    bias = mean - exact
    mqe = float(variance.sum() / n_samples + (bias**2).sum())
    return BiasVarianceReport(
        smoothing=float(smoothing),
        n_samples=n_samples,
        mean=mean,
        variance=variance,
        bias=bias,
        mqe=mqe,
    )


def indicator_mean_oracle(problem: ChanceConstrainedProblem, u) -> float:
    """Quadrature mean of the raw indicator estimate (independent of the
    closed-form probability oracle)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    pts = constraint_crossings(problem, u, [problem.threshold])
    return noise_expectation(problem, lambda x: indicator_estimate(problem, u, x), pts)


# ---------------------------------------------------------------------------
# smoothing constants and the optimal trade-off

@dataclass(frozen=True)
class EstimatorConstants:
    """Leading constants of the estimator moments at a fixed point:

    variance_j(s) -> A_j / s   and   bias_j(s) -> -B_j s^2   as s -> 0,
    aggregated as A = sum_j A_j and B = sqrt(sum_j B_j^2).
    """

    A: float
    B: float
    A_components: np.ndarray
    B_components: np.ndarray
    reports: tuple[BiasVarianceReport, ...]


def fit_estimator_constants(
    problem: ChanceConstrainedProblem,
    estimator: EstimatorConfig,
    u,
    smoothings: Sequence[float] = (0.05, 0.1),
) -> EstimatorConstants:
    """Extract (A, B) from oracle sweeps at small smoothing values.

    The 1/s coefficient of the variance equals that of the second moment,
    and second_moment * s converges with an O(s^2) error (odd corrections
    cancel for symmetric kernels / symmetric differences), so A_j is fitted
    on the model second_moment_j(s) * s = A_j + a s^2.  Likewise
    bias_j(s)/s^2 = -B_j + b s^2.  Two smoothing values give the exact
    Richardson elimination; more give a least-squares fit.
    """
    if len(smoothings) < 2:
        raise ValidationError("need at least two smoothing values to fit constants")
    ss = np.asarray(sorted(smoothings), dtype=float)
    reports = tuple(bias_variance_oracle(problem, estimator, u, s) for s in ss)

    dim = problem.dim_u
    A_comp = np.zeros(dim)
    B_comp = np.zeros(dim)
    design = np.column_stack([np.ones_like(ss), ss**2])
    for j in range(dim):
        m_times_s = np.array([rep.second_moment[j] * rep.smoothing for rep in reports])
        A_comp[j] = np.linalg.lstsq(design, m_times_s, rcond=None)[0][0]
        bias_over_s2 = np.array([rep.bias[j] / rep.smoothing**2 for rep in reports])
        B_comp[j] = -np.linalg.lstsq(design, bias_over_s2, rcond=None)[0][0]
    A = float(A_comp.sum())
    B = float(np.sqrt((B_comp**2).sum()))
    return EstimatorConstants(A=A, B=B, A_components=A_comp, B_components=B_comp, reports=reports)


def optimal_smoothing(A: float, B: float, n_samples: float) -> tuple[float, float]:
    """Minimizer of A/(N s) + B^2 s^4 and its value:

    s* = (A / (4 B^2 N))^(1/5),   MQE* = 5 A^(4/5) B^(2/5) / (4 N)^(4/5).
    """
    if A <= 0 or B <= 0 or n_samples <= 0:
        raise ValidationError("A, B and the sample count must all be positive")
    s_star = (A / (4.0 * B**2 * n_samples)) ** 0.2
    mqe_star = 5.0 * A**0.8 * B**0.4 / (4.0 * n_samples) ** 0.8
    return s_star, mqe_star


# ---------------------------------------------------------------------------
# mean-field drift and projected ODE

def mean_field(problem: ChanceConstrainedProblem, u, lam) -> np.ndarray:
    """Drift of the averaged dynamics at (u, lam), with exact expectations:

    primal block: -( grad J + sum_i lam_i a_i - lam_P grad P )
    dual block:   ( a_i . u - b_i rows..., pi - P(u) )
    """
    if problem.mean_cost_grad is None or problem.prob_oracle is None:
        raise OracleUnavailableError(f"problem {problem.name!r} lacks mean-field oracles")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n_lin = len(problem.linear_dualized)
    grad = problem.mean_cost_grad(u).astype(float)
    for (a, _), li in zip(problem.linear_dualized, lam[:n_lin]):
        grad += li * a
    grad -= lam[n_lin] * analytic_probability_gradient(problem, u)
    dual = np.concatenate(
        [
            problem.linear_residuals(u),
            [problem.prob_level - problem.prob_oracle(u)],
        ]
    )
    return np.concatenate([-grad, dual])


@dataclass
class OdePath:
    ts: np.ndarray
    us: np.ndarray
    lams: np.ndarray

    def final(self) -> tuple[np.ndarray, np.ndarray]:
        return self.us[-1], self.lams[-1]

    def vectors(self) -> np.ndarray:
        return np.hstack([self.us, self.lams])


def ode_integrate(
    problem: ChanceConstrainedProblem,
    initial: IterateState,
    horizon: float,
    dt: float,
    record_stride: int = 1,
) -> OdePath:
    """Classical fourth-order integration of the mean-field dynamics with
    projection after every step (and at stage points, so the oracles are
    only ever evaluated inside their domain).  The projection realizes the
    reflection that keeps the flow inside the feasible region."""
    if dt <= 0:
        raise ValidationError("time step must be positive")
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    n = problem.dim_u

    def project(x):
        out = x.copy()
        out[:n] = problem.admissible.project(x[:n])
        out[n:] = np.maximum(x[n:], 0.0)
        return out

    def drift(x):
        x = project(x)
        return mean_field(problem, x[:n], x[n:])

    x = project(np.concatenate([initial.u, initial.lam]))
    steps = int(round(horizon / dt))
    ts, rows = [0.0], [x.copy()]
    for i in range(1, steps + 1):
        k1 = drift(x)
        k2 = drift(x + 0.5 * dt * k1)
        k3 = drift(x + 0.5 * dt * k2)
        k4 = drift(x + dt * k3)
        x = project(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"mean-field state became non-finite at t={i * dt}")
        if i % record_stride == 0 or i == steps:
            ts.append(i * dt)
            rows.append(x.copy())
    rows = np.asarray(rows)
    return OdePath(ts=np.asarray(ts), us=rows[:, :n], lams=rows[:, n:])


# ---------------------------------------------------------------------------
# linearization at the saddle point

@dataclass(frozen=True)
class LinearizationReport:
    """Linearized drift matrix at an equilibrium and its stability verdicts.

    stable_sublinear asks only for positive real parts (enough when the
    step exponent stays below 1); stable_linear additionally requires the
    smallest real part to clear max(beta, (1+delta)/2), the threshold for
    unit-exponent steps.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    mu_bar: float
    threshold_linear: float
    stable_sublinear: bool
    stable_linear: bool
    kept_primal: tuple[int, ...]
    kept_constraints: tuple[str, ...]


def linearize(
    problem: ChanceConstrainedProblem,
    u,
    lam,
    frozen_primal: Sequence[int] = (),
    saturated: Optional[Sequence[int]] = None,
    fd_step: float = 1e-5,
    beta: float = 0.4,
    delta: Optional[float] = None,
    saturation_tol: float = 1e-6,
) -> LinearizationReport:
    """Block matrix [[H, C^T], [-C, 0]] of the averaged dynamics around
    (u, lam), where H is the primal Hessian of the Lagrangian (central
    differences of the first-order oracles) and C stacks the gradients of
    the saturated dualized constraints.

    frozen_primal lists coordinates pinned at a box bound, dropped from
    the reduced dynamics; saturated overrides the automatic saturation
    detection (indices: linear rows first, probability constraint last).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n, n_lin = problem.dim_u, len(problem.linear_dualized)

    def primal_gradient(uu):
        g = problem.mean_cost_grad(uu).astype(float)
        for (a, _), li in zip(problem.linear_dualized, lam[:n_lin]):
            g += li * a
        g -= lam[n_lin] * analytic_probability_gradient(problem, uu)
        return g

    hess = np.zeros((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = fd_step
        hess[:, j] = (primal_gradient(u + step) - primal_gradient(u - step)) / (2 * fd_step)
    if not np.all(np.isfinite(hess)):
        raise ValidationError("second differences of the oracles are not finite")
    hess = 0.5 * (hess + hess.T)  # symmetrize central-difference noise

    if saturated is None:
        saturated = []
        residuals = problem.linear_residuals(u)
        for i in range(n_lin):
            if abs(residuals[i]) <= saturation_tol or lam[i] > saturation_tol:
                saturated.append(i)
        gap = problem.prob_oracle(u) - problem.prob_level
        if abs(gap) <= saturation_tol or lam[n_lin] > saturation_tol:
            saturated.append(n_lin)
    saturated = sorted(saturated)

    rows, labels = [], []
    for i in saturated:
        if i < n_lin:
            rows.append(problem.linear_dualized[i][0])
            labels.append(f"linear[{i}]")
        else:
            rows.append(-analytic_probability_gradient(problem, u))
            labels.append("probability")
    constraint_jac = np.asarray(rows) if rows else np.zeros((0, n))

    keep = tuple(j for j in range(n) if j not in set(frozen_primal))
    h_red = hess[np.ix_(keep, keep)]
    c_red = constraint_jac[:, keep] if constraint_jac.size else constraint_jac.reshape(0, len(keep))

    m = len(keep) + len(saturated)
    matrix = np.zeros((m, m))
    matrix[: len(keep), : len(keep)] = h_red
    if saturated:
        matrix[: len(keep), len(keep):] = c_red.T
        matrix[len(keep):, : len(keep)] = -c_red

    eigvals, eigvecs = np.linalg.eig(matrix)
    scale = max(1.0, float(np.linalg.norm(matrix)))
    resid = np.linalg.norm(matrix @ eigvecs - eigvecs * eigvals[None, :], axis=0)
    if np.any(resid > 1e-8 * scale):
        raise ValidationError("eigenvalue computation did not converge to tolerance")

    mu_bar = float(np.min(eigvals.real))
    if delta is None:
        delta = -beta / 2.0
    threshold = max(float(beta), (1.0 + float(delta)) / 2.0)
    return LinearizationReport(
        matrix=matrix,
        eigenvalues=eigvals,
        mu_bar=mu_bar,
        threshold_linear=threshold,
        stable_sublinear=bool(mu_bar > 0.0),
        stable_linear=bool(mu_bar > threshold),
        kept_primal=keep,
        kept_constraints=tuple(labels),
    )


# ---------------------------------------------------------------------------
# empirical scaling diagnostics

@dataclass(frozen=True)
class CltSummary:
    """Distributional summary of rescaled errors X_k = k^(kappa/2) (x_k - x*)
    across replications, plus the empirical mean-square-error decay slope."""

    checkpoints: tuple[int, ...]
    means: np.ndarray          # (n_checkpoints, dim)
    covariances: np.ndarray    # (n_checkpoints, dim, dim)
    skewness: np.ndarray       # (n_checkpoints, dim)
    ex_kurtosis: np.ndarray    # (n_checkpoints, dim)
    scaled_mse: np.ndarray     # (n_checkpoints,) k^kappa * MSE
    mse_slope: float
    kappa: float


def clt_diagnostics(
    trajectories: Sequence,
    x_star,
    kappa: float,
    checkpoints: Sequence[int] = (1000, 2000, 5000),
    slope_window: tuple[int, int] = (500, 5000),
    min_replications: int = 30,
) -> CltSummary:
    """Rescaled-error statistics at the checkpoints and the log-log slope
    of the mean-square error over the window.  Requires at least
    min_replications trajectories recorded on a common index grid."""
    if len(trajectories) < min_replications:
        raise ValidationError(
            f"need at least {min_replications} replications, got {len(trajectories)}"
        )
    x_star = np.asarray(x_star, dtype=float)
    ks = trajectories[0].ks
    for tr in trajectories[1:]:
        if not np.array_equal(tr.ks, ks):
            raise ValidationError("trajectories are recorded on different index grids")

    errors = np.stack([tr.errors_vs(x_star) for tr in trajectories])  # (M, m, dim)
    sq_norm = np.sum(errors**2, axis=2)  # (M, m)
    mse = sq_norm.mean(axis=0)  # (m,)

    means, covs, skews, kurts, scaled = [], [], [], [], []
    for ck in checkpoints:
        idx = np.searchsorted(ks, ck)
        if idx >= len(ks) or ks[idx] != ck:
            raise ValidationError(f"checkpoint {ck} was not recorded")
        x = float(ck) ** (kappa / 2.0) * errors[:, idx, :]
        means.append(x.mean(axis=0))
        covs.append(np.cov(x, rowvar=False))
        skews.append(stats.skew(x, axis=0))
        kurts.append(stats.kurtosis(x, axis=0))
        scaled.append(float(ck) ** kappa * mse[idx])

    lo, hi = slope_window
    window = (ks >= lo) & (ks <= hi) & (mse > 0)
    if window.sum() < 2:
        raise ValidationError("slope window contains fewer than two recorded points")
    slope = float(np.polyfit(np.log(ks[window]), np.log(mse[window]), 1)[0])

    return CltSummary(
        checkpoints=tuple(int(c) for c in checkpoints),
        means=np.asarray(means),
        covariances=np.asarray(covs),
        skewness=np.asarray(skews),
        ex_kurtosis=np.asarray(kurts),
        scaled_mse=np.asarray(scaled),
        mse_slope=slope,
        kappa=float(kappa),
    )
