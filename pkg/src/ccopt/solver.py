"""Projected stochastic primal-dual iteration and deterministic KT utilities.

One iteration draws a single fresh sample xi and uses it in both updates:

    u_{k+1}   = clamp( u_k - eps_k [ grad_u j(u_k, xi)
                                     + sum_i lam_i a_i
                                     - lam_P ghat(u_k, xi) ] )
    lam_i     = max(0, lam_i + rho_k (a_i . u_{k+1} - b_i))      (linear rows)
    lam_P     = max(0, lam_P + rho_k (pi - Phat(u_{k+1}, xi)))   (probability)

ghat estimates grad P (the dualized constraint is -P(u) <= -pi, hence the
minus sign) and Phat is the raw indicator or its mollified version.  The
linear rows use their exact residuals: they are noise-free, so sampling
them would only add variance.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, DivergenceError, ValidationError
from .estimators import EstimatorConfig, gradient_estimate, probability_estimate
from .kernels import kernel_by_name
from .problem import ChanceConstrainedProblem, make_problem, project_dual
from .schedules import (
    ScheduleSet,
    SmoothingSchedule,
    StepSchedule,
    check_conditions_ac,
    check_conditions_fd,
)

__all__ = [
    "IterateState",
    "Trajectory",
    "RunConfig",
    "arrow_hurwicz_step",
    "deterministic_step",
    "run",
    "kt_residual",
    "solve_toy_deterministic",
]

DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class IterateState:
    """Primal-dual iterate: u in the box, lam >= 0 (linear multipliers
    first, probability multiplier last), k the iteration count."""

    u: np.ndarray
    lam: np.ndarray
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u", np.atleast_1d(np.asarray(self.u, dtype=float)))
        object.__setattr__(self, "lam", np.atleast_1d(np.asarray(self.lam, dtype=float)))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.lam])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.lam)))


@dataclass
class Trajectory:
    """Recorded history of a run: iterate indices (strictly increasing),
    primal and dual rows, the terminal state and the seed that drove it."""

    ks: np.ndarray
    us: np.ndarray
    lams: np.ndarray
    seed: Optional[int]
    terminal: IterateState

    def __post_init__(self):
        if np.any(np.diff(self.ks) <= 0):
            raise ValidationError("recorded iteration indices must increase strictly")

    def __len__(self) -> int:
        return len(self.ks)

    def vectors(self) -> np.ndarray:
        """(m, dim_u + n_dual) array of recorded iterates."""
        return np.hstack([self.us, self.lams])

    def errors_vs(self, x_star: np.ndarray) -> np.ndarray:
        return self.vectors() - np.asarray(x_star, dtype=float)[None, :]


def _validate_state(problem: ChanceConstrainedProblem, state: IterateState):
    if state.u.size != problem.dim_u:
        raise DimensionMismatchError(
            f"state has {state.u.size} primal coordinates, problem wants {problem.dim_u}"
        )
    if state.lam.size != problem.n_dual:
        raise DimensionMismatchError(
            f"state has {state.lam.size} multipliers, problem wants {problem.n_dual}"
        )


def arrow_hurwicz_step(
    state: IterateState,
    problem: ChanceConstrainedProblem,
    estimator: EstimatorConfig,
    schedules: ScheduleSet,
    rng: np.random.Generator,
    lambda_cap: Optional[float] = None,
) -> IterateState:
    """One stochastic step; the schedule index is state.k + 1."""
    _validate_state(problem, state)
    k = state.k + 1
    eps = schedules.step.value(k)
    rho = schedules.dual_step.value(k)
    cfg = estimator.with_smoothing(schedules.smoothing.value(k))

    xi = problem.noise.sample(rng)
    n_lin = len(problem.linear_dualized)
    lam_lin, lam_p = state.lam[:n_lin], state.lam[n_lin]

    direction = problem.cost_grad(state.u, xi).astype(float)
    for (a, _), li in zip(problem.linear_dualized, lam_lin):
        direction += li * a
    direction -= lam_p * gradient_estimate(problem, state.u, xi, cfg)
    u_next = problem.admissible.project(state.u - eps * direction)

    lam_next = np.empty_like(state.lam)
    for i, (a, bnd) in enumerate(problem.linear_dualized):
        lam_next[i] = lam_lin[i] + rho * (a @ u_next - bnd)
    p_hat = probability_estimate(problem, u_next, xi, cfg)
    lam_next[n_lin] = lam_p + rho * (problem.prob_level - p_hat)
    lam_next = project_dual(lam_next, cap=lambda_cap)

    return IterateState(u_next, lam_next, k)


def deterministic_step(
    state: IterateState,
    problem: ChanceConstrainedProblem,
    eps: float,
    rho: float,
    lambda_cap: Optional[float] = None,
) -> IterateState:
    """Mean-field variant: exact expectations in place of the stochastic
    estimates (requires the closed-form oracles)."""
    _validate_state(problem, state)
    n_lin = len(problem.linear_dualized)
    lam_lin, lam_p = state.lam[:n_lin], state.lam[n_lin]

    direction = problem.mean_cost_grad(state.u).astype(float)
    for (a, _), li in zip(problem.linear_dualized, lam_lin):
        direction += li * a
    direction -= lam_p * problem.prob_grad_oracle(state.u)
    u_next = problem.admissible.project(state.u - eps * direction)

    lam_next = np.empty_like(state.lam)
    for i, (a, bnd) in enumerate(problem.linear_dualized):
        lam_next[i] = lam_lin[i] + rho * (a @ u_next - bnd)
    lam_next[n_lin] = lam_p + rho * (problem.prob_level - problem.prob_oracle(u_next))
    lam_next = project_dual(lam_next, cap=lambda_cap)

    return IterateState(u_next, lam_next, state.k + 1)


@dataclass(frozen=True)
class RunConfig:
    """Everything a single run needs, JSON-serializable.

    Schedule constants follow the conventional letters: primal step
    d/(e+k), dual step f/(g+k), smoothing scale a (convolution radius) or
    b (difference step) with exponent defaulting to beta/2.
    """

    problem_name: str = "portfolio"
    problem_overrides: dict = field(default_factory=dict)
    estimator_kind: str = "ac"
    kernel_name: str = "parabolic"
    dual_estimate_mode: Optional[str] = None  # default: mollified for AC, indicator for FD
    gamma: float = 1.0
    beta: float = 0.4
    hypothesis: str = "H3"
    a: float = 1.30
    b: float = 0.63
    d: float = 1.0
    e: float = 0.0
    f: float = 1.0
    g: float = 0.0
    iterations: int = 5000
    initial_u: tuple = (0.2, 0.8)
    initial_lam: tuple = (0.5, 0.3)
    record_stride: int = 1
    seed: int = 0
    lambda_cap: Optional[float] = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iteration count must be nonnegative")
        if self.record_stride < 1:
            raise ValidationError("record stride must be >= 1")
        mode = self.dual_estimate_mode
        if mode is None:
            mode = "mollified" if self.estimator_kind == "ac" else "indicator"
            object.__setattr__(self, "dual_estimate_mode", mode)

    def build_problem(self) -> ChanceConstrainedProblem:
        return make_problem(self.problem_name, **self.problem_overrides)

    def build_estimator(self) -> EstimatorConfig:
        scale = self.a if self.estimator_kind == "ac" else self.b
        return EstimatorConfig(
            kind=self.estimator_kind,
            smoothing=scale,  # placeholder; the per-step value comes from the schedule
            kernel=kernel_by_name(self.kernel_name),
            dual_estimate_mode=self.dual_estimate_mode,
        )

    def build_schedules(self) -> ScheduleSet:
        scale = self.a if self.estimator_kind == "ac" else self.b
        return ScheduleSet(
            step=StepSchedule(self.d, self.e),
            dual_step=StepSchedule(self.f, self.g),
            smoothing=SmoothingSchedule(scale, self.beta / 2.0),
        )

    def initial_state(self) -> IterateState:
        return IterateState(np.asarray(self.initial_u), np.asarray(self.initial_lam), 0)

    def replace(self, **changes) -> "RunConfig":
        data = asdict(self)
        data.update(changes)
        return RunConfig(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown run-config key(s): {sorted(unknown)}")
        coerced = dict(data)
        for key in ("initial_u", "initial_lam"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        return cls(**coerced)


def run(config: RunConfig, problem: Optional[ChanceConstrainedProblem] = None) -> Trajectory:
    """Iterate from the configured initial state for `iterations` steps,
    recording every `record_stride`-th iterate (plus the initial and final
    ones).  Divergence raises DivergenceError carrying the partial record.
    """
    if problem is None:
        problem = config.build_problem()
    report = (
        check_conditions_ac(config.gamma, config.beta)
        if config.estimator_kind == "ac"
        else check_conditions_fd(config.gamma, config.beta, config.hypothesis)
    )
    if not report.passed:
        # pathological tunings are legitimate experiments, so warn only
        warnings.warn(
            "schedule exponents violate the convergence conditions: "
            + "; ".join(report.violations),
            stacklevel=2,
        )
    estimator = config.build_estimator()
    schedules = config.build_schedules()
    state = config.initial_state()
    _validate_state(problem, state)

    rng = np.random.default_rng(config.seed)
    ks, us, lams = [state.k], [state.u.copy()], [state.lam.copy()]

    def record(s: IterateState):
        ks.append(s.k)
        us.append(s.u.copy())
        lams.append(s.lam.copy())

    def freeze(terminal: IterateState) -> Trajectory:
        return Trajectory(
            ks=np.asarray(ks, dtype=int),
            us=np.asarray(us, dtype=float),
            lams=np.asarray(lams, dtype=float),
            seed=config.seed,
            terminal=terminal,
        )

    for step_idx in range(1, config.iterations + 1):
        state = arrow_hurwicz_step(
            state, problem, estimator, schedules, rng, lambda_cap=config.lambda_cap
        )
        # the norm of a non-finite vector is nan/inf, so one comparison
        # covers both the blow-up and the non-finite case
        norm = float(np.linalg.norm(state.as_vector()))
        if not norm <= DIVERGENCE_NORM:
            partial = freeze(state)
            raise DivergenceError(
                f"iterate diverged at step {step_idx}", state=state, trajectory=partial
            )
        if step_idx % config.record_stride == 0 or step_idx == config.iterations:
            record(state)

    return freeze(state)


def kt_residual(
    problem: ChanceConstrainedProblem,
    u,
    lam,
    eps: float = 0.1,
    rho: float = 0.1,
) -> float:
    """Fixed-point gap of the projected optimality system at (u, lam),
    evaluated with exact expectations; zero exactly at equilibria."""
    state = IterateState(u, lam, 0)
    _validate_state(problem, state)
    nxt = deterministic_step(state, problem, eps, rho)
    return float(
        np.linalg.norm(state.u - nxt.u) + np.linalg.norm(state.lam - nxt.lam)
    )


def solve_toy_deterministic(pi: float) -> tuple[float, float]:
    """KT point of the toy problem: the primal sits at the (1-pi) quantile
    of the noise, the multiplier follows from stationarity
    (u - 1) + lam F'(u) = 0."""
    if not (0.0 < pi < 1.0):
        raise ValidationError("probability level must lie in (0, 1)")
    problem = make_problem("toy", pi=pi)
    u_opt, lam_opt = problem.reference_saddle
    return float(u_opt[0]), float(lam_opt[0])
