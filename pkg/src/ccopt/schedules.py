"""Step-size and smoothing schedules, convergence conditions, rate prediction.

Schedules follow the power-law family

    eps_k = d / (e + k)          primal step
    rho_k = f / (g + k)          dual step
    s_k   = scale * k^(-expo)    smoothing radius/step, expo defaulting to beta/2

with the step exponents written as eps_k ~ k^(-gamma).  Convergence of the
projected stochastic iteration requires gamma <= 1, beta + gamma > 1 and a
third inequality tied to the variance growth of the gradient estimate; the
mean-square error then decays like k^(-kappa) with kappa = min(2 beta,
gamma + delta), delta being the variance exponent.

All checks run in exact rational arithmetic when the inputs are exact
(int/Fraction); floats are compared with a 1e-12 slack on the strict
inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Optional, Union

from .errors import ValidationError

__all__ = [
    "StepSchedule",
    "SmoothingSchedule",
    "ScheduleSet",
    "RateTuning",
    "ConditionReport",
    "check_conditions_ac",
    "check_conditions_fd",
    "variance_exponent",
    "predict_rate",
    "optimal_tuning",
    "evaluate_schedules",
]

Number = Union[int, float, Fraction]
HYPOTHESES = ("H3", "H4", "none")
_SLACK = 1e-12


@dataclass(frozen=True)
class StepSchedule:
    """eps_k = numerator / (offset + k), k >= 1.

    Any numerator > 0 and offset >= 0 gives a divergent step sum with
    square-summable steps.
    """

    numerator: float
    offset: float = 0.0

    def __post_init__(self):
        if not self.numerator > 0:
            raise ValidationError("step numerator must be positive")
        if self.offset < 0:
            raise ValidationError("step offset must be nonnegative")

    def value(self, k: int) -> float:
        if k < 1:
            raise ValidationError(f"schedule index must be >= 1, got {k}")
        return self.numerator / (self.offset + k)


@dataclass(frozen=True)
class SmoothingSchedule:
    """s_k = scale * k^(-exponent), k >= 1."""

    scale: float
    exponent: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError("smoothing scale must be positive")
        if not self.exponent > 0:
            raise ValidationError("smoothing exponent must be positive")

    def value(self, k: int) -> float:
        if k < 1:
            raise ValidationError(f"schedule index must be >= 1, got {k}")
        return self.scale * float(k) ** (-self.exponent)


@dataclass(frozen=True)
class ScheduleSet:
    """Bundle of primal step, dual step and smoothing schedules."""

    step: StepSchedule
    dual_step: StepSchedule
    smoothing: SmoothingSchedule


def evaluate_schedules(
    step: StepSchedule,
    smoothing: SmoothingSchedule,
    k: int,
    dual_step: Optional[StepSchedule] = None,
) -> tuple[float, float, float]:
    """(eps_k, rho_k, s_k) at iteration k >= 1; rho mirrors eps unless a
    separate dual schedule is supplied."""
    rho = (dual_step if dual_step is not None else step).value(k)
    return step.value(k), rho, smoothing.value(k)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a convergence-condition check."""

    passed: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.passed


def _exact(x: Number) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


def _gt(lhs: Number, rhs: Number) -> bool:
    """Strict inequality, exact for rationals, 1e-12 slack for floats."""
    if _exact(lhs) and _exact(rhs):
        return Fraction(lhs) > Fraction(rhs)
    return float(lhs) > float(rhs) + _SLACK


def _ge(lhs: Number, rhs: Number) -> bool:
    if _exact(lhs) and _exact(rhs):
        return Fraction(lhs) >= Fraction(rhs)
    return float(lhs) >= float(rhs) - _SLACK


def _half(x: Number) -> Number:
    return Fraction(x) / 2 if _exact(x) else x / 2.0


def check_conditions_ac(gamma: Number, beta: Number) -> ConditionReport:
    """gamma <= 1, beta + gamma > 1 and 2 gamma - beta/2 > 1."""
    if not (_gt(gamma, 0) and _gt(beta, 0)):
        raise ValidationError("gamma and beta must be positive")
    violations = []
    if not _ge(1, gamma):
        violations.append(f"gamma = {gamma} exceeds 1")
    if not _gt(beta + gamma, 1):
        violations.append(f"beta + gamma = {beta + gamma} is not > 1")
    lhs = 2 * gamma - _half(beta)
    if not _gt(lhs, 1):
        violations.append(f"2*gamma - beta/2 = {lhs} is not > 1")
    return ConditionReport(not violations, tuple(violations))


def check_conditions_fd(
    gamma: Number, beta: Number, hypothesis: str = "H3"
) -> ConditionReport:
    """Same first two inequalities as AC; the third depends on how the
    constraint responds to the noise at the boundary:

      H3   (nonzero first derivative)   2 gamma - beta/2   > 1
      H4   (nonzero second derivative)  2 gamma - 3 beta/4 > 1
      none (worst case)                 2 gamma - beta     > 1
    """
    if hypothesis not in HYPOTHESES:
        raise ValidationError(
            f"unknown hypothesis {hypothesis!r}; expected one of {HYPOTHESES}"
        )
    if not (_gt(gamma, 0) and _gt(beta, 0)):
        raise ValidationError("gamma and beta must be positive")
    violations = []
    if not _ge(1, gamma):
        violations.append(f"gamma = {gamma} exceeds 1")
    if not _gt(beta + gamma, 1):
        violations.append(f"beta + gamma = {beta + gamma} is not > 1")
    if hypothesis == "H3":
        lhs, label = 2 * gamma - _half(beta), "2*gamma - beta/2"
    elif hypothesis == "H4":
        q = Fraction(3, 4) * Fraction(beta) if _exact(beta) else 0.75 * beta
        lhs, label = 2 * gamma - q, "2*gamma - 3*beta/4"
    else:
        lhs, label = 2 * gamma - beta, "2*gamma - beta"
    if not _gt(lhs, 1):
        violations.append(f"{label} = {lhs} is not > 1")
    return ConditionReport(not violations, tuple(violations))


def variance_exponent(beta: Number, kind: str, hypothesis: str = "H3") -> Number:
    """delta with Var ~ k^(-delta): -beta/2 for AC and FD under H3,
    -3 beta/4 under H4, -beta in the FD worst case."""
    if kind == "ac" or (kind == "fd" and hypothesis == "H3"):
        return -_half(beta)
    if kind == "fd" and hypothesis == "H4":
        return -(Fraction(3, 4) * Fraction(beta)) if _exact(beta) else -0.75 * beta
    if kind == "fd" and hypothesis == "none":
        return -beta
    raise ValidationError(f"unknown estimator kind {kind!r} / hypothesis {hypothesis!r}")


@dataclass(frozen=True)
class RateTuning:
    """Exponent choice and the mean-square-error rate it buys.

    kappa = min(2 beta, gamma + delta); exact Fractions are preserved when
    the inputs are exact.
    """

    gamma: Number
    beta: Number
    delta: Number
    kappa: Number

    def as_floats(self) -> tuple[float, float, float, float]:
        return (float(self.gamma), float(self.beta), float(self.delta), float(self.kappa))


def predict_rate(
    gamma: Number, beta: Number, kind: str, hypothesis: str = "H3"
) -> RateTuning:
    """Rate tuple for a condition-satisfying (gamma, beta); raises when the
    convergence conditions fail."""
    report = (
        check_conditions_ac(gamma, beta)
        if kind == "ac"
        else check_conditions_fd(gamma, beta, hypothesis)
    )
    if not report.passed:
        raise ValidationError(
            "convergence conditions violated: " + "; ".join(report.violations)
        )
    delta = variance_exponent(beta, kind, hypothesis)
    kappa = min(2 * beta, gamma + delta)
    return RateTuning(gamma, beta, delta, kappa)


def optimal_tuning(kind: str, hypothesis: str = "H3") -> RateTuning:
    """Fastest provable rate: gamma = 1 with beta balancing 2 beta = gamma + delta.

    AC (and FD under H3): beta = 2/5,  kappa = 4/5
    FD under H4:          beta = 4/11, kappa = 8/11
    FD worst case:        beta = 1/3,  kappa = 2/3
    """
    if kind == "ac" or (kind == "fd" and hypothesis == "H3"):
        beta = Fraction(2, 5)
    elif kind == "fd" and hypothesis == "H4":
        beta = Fraction(4, 11)
    elif kind == "fd" and hypothesis == "none":
        beta = Fraction(1, 3)
    else:
        raise ValidationError(f"unknown estimator kind {kind!r} / hypothesis {hypothesis!r}")
    return predict_rate(Fraction(1), beta, kind, hypothesis)
