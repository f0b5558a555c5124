"""Canonical chance-constrained problem form and the two built-in instances.

A problem is
    min  E[ j(u, xi) ]   over u in a box
    s.t. P( theta(u, xi) <= alpha ) >= pi
    plus optional dualized linear rows  a . u <= b.

The probability constraint is handled through the expectation of the
indicator I(alpha - theta >= 0), with the closed convention I(0) = 1.
Both built-in instances (a one-dimensional toy with Gaussian noise and a
two-asset portfolio with bounded polynomial noise) register closed-form
oracles for P(u) and grad P(u).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DimensionMismatchError, OracleUnavailableError, ValidationError

__all__ = [
    "AdmissibleBox",
    "NoiseModel",
    "quintic_noise",
    "gaussian_noise",
    "quintic_cdf",
    "quintic_density",
    "quintic_quantile",
    "sample_noise",
    "project_admissible",
    "project_dual",
    "ChanceConstrainedProblem",
    "make_portfolio_problem",
    "make_toy_problem",
    "make_problem",
    "solve_portfolio_saddle",
    "analytic_probability",
    "analytic_probability_gradient",
]


# ---------------------------------------------------------------------------
# projections

@dataclass(frozen=True)
class AdmissibleBox:
    """Axis-aligned box; entries may be -inf / +inf for one-sided bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatchError(
                f"box bounds have shapes {lo.shape} and {hi.shape}"
            )
        if np.any(lo > hi):
            raise ValidationError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != self.lower.shape:
            raise DimensionMismatchError(
                f"point of shape {x.shape} projected onto box of shape {self.lower.shape}"
            )
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


def project_admissible(x, box: AdmissibleBox) -> np.ndarray:
    """Euclidean projection onto the box (componentwise clamp)."""
    return box.project(x)


def project_dual(lam, cap: Optional[float] = None) -> np.ndarray:
    """Projection onto the nonnegative cone, with an optional upper cap."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.maximum(lam, 0.0)
    if cap is not None:
        out = np.minimum(out, cap)
    return out


# ---------------------------------------------------------------------------
# noise models

def quintic_cdf(x, xi_bar: float, sigma: float):
    """Distribution function that is 0 below xi_bar-sigma and 1 above xi_bar+sigma.

    On the support it is the quintic (3 t^5 - 10 t^3 + 15 t + 8)/16 with
    t = (x - xi_bar)/sigma; the density is the biweight bump 15(1-t^2)^2/(16 sigma).
    """
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    t = (np.asarray(x, dtype=float) - xi_bar) / sigma
    tc = np.clip(t, -1.0, 1.0)
    val = (3.0 * tc**5 - 10.0 * tc**3 + 15.0 * tc + 8.0) / 16.0
    out = np.where(t <= -1.0, 0.0, np.where(t >= 1.0, 1.0, val))
    return out if out.ndim else float(out)


def quintic_density(x, xi_bar: float, sigma: float):
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    t = (np.asarray(x, dtype=float) - xi_bar) / sigma
    inside = np.abs(t) <= 1.0
    tc = np.where(inside, t, 0.0)
    out = np.where(inside, 15.0 * (1.0 - tc**2) ** 2 / (16.0 * sigma), 0.0)
    return out if out.ndim else float(out)


def _quintic_t_scalar(p: float) -> float:
    """Invert the unit quintic CDF for one probability.

    Newton iteration from t = 2p - 1, safeguarded by the surrounding
    bisection bracket (the CDF is monotone, so the bracket never lies);
    terminates well below the 1e-12 tolerance contract.
    """
    lo, hi = -1.0, 1.0
    t = 2.0 * p - 1.0
    for _ in range(100):
        f = (3.0 * t**5 - 10.0 * t**3 + 15.0 * t + 8.0) / 16.0 - p
        if f > 0.0:
            hi = t
        elif f < 0.0:
            lo = t
        else:
            return t
        d = (15.0 * t**4 - 30.0 * t**2 + 15.0) / 16.0
        t_new = t - f / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) < 1e-15:
            return t_new
        t = t_new
    return t


def _quintic_t_from_p(p: np.ndarray) -> np.ndarray:
    """Vectorized inversion of the unit quintic CDF by bisection on [-1, 1].

    60 halvings bound the error by 2^-59, far below the 1e-12 contract;
    bisection is exact-bracket safe because the CDF is monotone.
    """
    p = np.asarray(p, dtype=float)
    lo = np.full_like(p, -1.0)
    hi = np.full_like(p, 1.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = (3.0 * mid**5 - 10.0 * mid**3 + 15.0 * mid + 8.0) / 16.0
        take_hi = val < p
        lo = np.where(take_hi, mid, lo)
        hi = np.where(take_hi, hi, mid)
    return 0.5 * (lo + hi)


def quintic_quantile(p, xi_bar: float, sigma: float):
    """Inverse of quintic_cdf; p outside [0, 1] is rejected."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if np.ndim(p) == 0:
        pf = float(p)
        if not (0.0 <= pf <= 1.0):
            raise ValidationError("quantile argument must lie in [0, 1]")
        if pf <= 0.0:
            return xi_bar - sigma
        if pf >= 1.0:
            return xi_bar + sigma
        return xi_bar + sigma * _quintic_t_scalar(pf)
    parr = np.asarray(p, dtype=float)
    if np.any(parr < 0.0) or np.any(parr > 1.0):
        raise ValidationError("quantile argument must lie in [0, 1]")
    t = _quintic_t_from_p(parr)
    # exact endpoints, immune to bisection round-off
    t = np.where(parr <= 0.0, -1.0, np.where(parr >= 1.0, 1.0, t))
    return xi_bar + sigma * t


@dataclass(frozen=True)
class NoiseModel:
    """Scalar noise distribution: 'quintic' (bounded) or 'gaussian'.

    Parameters are (location, scale): for the quintic kind the support is
    [location - scale, location + scale]; for the Gaussian kind they are
    mean and standard deviation.
    """

    kind: str
    location: float
    scale: float

    def __post_init__(self):
        if self.kind not in ("quintic", "gaussian"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.scale <= 0:
            raise ValidationError("noise scale must be positive")

    def cdf(self, x):
        if self.kind == "quintic":
            return quintic_cdf(x, self.location, self.scale)
        return stats.norm.cdf(x, loc=self.location, scale=self.scale)

    def density(self, x):
        if self.kind == "quintic":
            return quintic_density(x, self.location, self.scale)
        return stats.norm.pdf(x, loc=self.location, scale=self.scale)

    def quantile(self, p):
        if self.kind == "quintic":
            return quintic_quantile(p, self.location, self.scale)
        return stats.norm.ppf(p, loc=self.location, scale=self.scale)

    def support(self) -> tuple[float, float]:
        if self.kind == "quintic":
            return (self.location - self.scale, self.location + self.scale)
        return (-np.inf, np.inf)

    def mean(self) -> float:
        return self.location

    def sample(self, rng: np.random.Generator, size=None):
        """Draw by inverse transform (quintic) or directly (gaussian).

        Deterministic given the generator state: one uniform (resp. one
        normal) is consumed per variate.
        """
        if self.kind == "quintic":
            u = rng.uniform(0.0, 1.0, size=size)
            return quintic_quantile(u, self.location, self.scale)
        z = rng.standard_normal(size=size)
        return self.location + self.scale * z


def quintic_noise(xi_bar: float = 0.4, sigma: float = 3.0) -> NoiseModel:
    return NoiseModel("quintic", xi_bar, sigma)


def gaussian_noise(mean: float, stddev: float) -> NoiseModel:
    return NoiseModel("gaussian", mean, stddev)


def sample_noise(model: NoiseModel, rng: np.random.Generator, size=None):
    return model.sample(rng, size=size)


# ---------------------------------------------------------------------------
# problem container

@dataclass(frozen=True)
class ChanceConstrainedProblem:
    """Cost/constraint pair with threshold, probability level and noise.

    cost, cost_grad, constraint, constraint_grad all take (u, xi) with u a
    1-d array of length dim_u and xi a scalar.  linear_dualized holds rows
    (a, b) for extra constraints a . u <= b handled by their own
    multipliers; the probability multiplier always comes last.

    Optional closed-form oracles:
      prob_oracle(u)        -> P(u) = P(theta(u, xi) <= alpha)
      prob_grad_oracle(u)   -> grad P(u)
      mean_cost_grad(u)     -> grad_u E[ j(u, xi) ]
      reference_saddle      -> (u_opt, lambda_opt) when known analytically
    """

    name: str
    dim_u: int
    cost: Callable[[np.ndarray, float], float]
    cost_grad: Callable[[np.ndarray, float], np.ndarray]
    constraint: Callable[[np.ndarray, float], float]
    constraint_grad: Callable[[np.ndarray, float], np.ndarray]
    threshold: float
    prob_level: float
    admissible: AdmissibleBox
    noise: NoiseModel
    linear_dualized: tuple = ()
    prob_oracle: Optional[Callable[[np.ndarray], float]] = None
    prob_grad_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mean_cost_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reference_saddle: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.prob_level < 1.0):
            raise ValidationError(
                f"probability level must lie in (0, 1), got {self.prob_level}"
            )
        if self.admissible.dim != self.dim_u:
            raise DimensionMismatchError(
                f"box dimension {self.admissible.dim} != dim_u {self.dim_u}"
            )
        rows = []
        for a, b in self.linear_dualized:
            a = np.atleast_1d(np.asarray(a, dtype=float))
            if a.size != self.dim_u:
                raise DimensionMismatchError("linear row length != dim_u")
            rows.append((a, float(b)))
        object.__setattr__(self, "linear_dualized", tuple(rows))

    @property
    def n_dual(self) -> int:
        """Multipliers: one per linear row plus one for the probability constraint."""
        return len(self.linear_dualized) + 1

    def linear_residuals(self, u: np.ndarray) -> np.ndarray:
        """a . u - b for each dualized linear row (<= 0 when satisfied)."""
        if not self.linear_dualized:
            return np.zeros(0)
        return np.array([a @ u - b for a, b in self.linear_dualized])


def analytic_probability(problem: ChanceConstrainedProblem, u) -> float:
    """Closed-form P(theta(u, xi) <= alpha); raises if no oracle is registered."""
    if problem.prob_oracle is None:
        raise OracleUnavailableError(
            f"problem {problem.name!r} has no closed-form probability oracle"
        )
    return float(problem.prob_oracle(np.atleast_1d(np.asarray(u, dtype=float))))


def analytic_probability_gradient(problem: ChanceConstrainedProblem, u) -> np.ndarray:
    if problem.prob_grad_oracle is None:
        raise OracleUnavailableError(
            f"problem {problem.name!r} has no closed-form probability gradient"
        )
    return np.asarray(
        problem.prob_grad_oracle(np.atleast_1d(np.asarray(u, dtype=float))), dtype=float
    )


# ---------------------------------------------------------------------------
# portfolio instance

def make_portfolio_problem(
    l: float = 0.15,
    b: float = 0.2,
    xi_bar: float = 0.4,
    sigma: float = 3.0,
    pi: float = 0.24,
) -> ChanceConstrainedProblem:
    """Two-asset investment problem.

    A fraction u goes to the safe asset (rate b), v to the risky asset
    (rate xi), the remainder 1-u-v is consumed with utility
    f(x) = -x^2/2 + 2x.  The payoff constraint
    (1+b)u + (1+xi)v >= 1+l must hold with probability at least pi, i.e.
    theta(u, v, xi) = (1+l) - (1+b)u - (1+xi)v <= 0.
    """
    noise = quintic_noise(xi_bar, sigma)
    safe = 1.0 + b
    debt = 1.0 + l

    def cost(u, xi):
        x = 1.0 - u[0] - u[1]
        f = -0.5 * x * x + 2.0 * x
        return -f - safe * u[0] - (1.0 + xi) * u[1]

    def cost_grad(u, xi):
        # d/du of -f(1-u-v) is f'(1-u-v) = 1 + u + v
        s = 1.0 + u[0] + u[1]
        return np.array([s - safe, s - (1.0 + xi)])

    def constraint(u, xi):
        return debt - safe * u[0] - (1.0 + xi) * u[1]

    def constraint_grad(u, xi):
        return np.array([-safe, -(1.0 + xi)])

    def prob_oracle(u):
        uu, v = u[0], u[1]
        shortfall = debt - safe * uu
        if v <= 0.0:
            if v < 0.0:
                raise ValidationError("portfolio oracle needs v >= 0")
            # degenerate: the event is deterministic, P jumps between 0 and 1
            return 1.0 if shortfall <= 0.0 else 0.0
        return 1.0 - quintic_cdf(shortfall / v - 1.0, xi_bar, sigma)

    def prob_grad_oracle(u):
        uu, v = u[0], u[1]
        if v <= 0.0:
            raise OracleUnavailableError(
                "probability gradient undefined at v = 0 (discontinuity locus)"
            )
        x = (debt - safe * uu) / v - 1.0
        q = quintic_density(x, xi_bar, sigma)
        return np.array([q * safe / v, q * (debt - safe * uu) / v**2])

    def mean_cost_grad(u):
        # cost gradient is affine in xi, so the expectation plugs in the mean
        s = 1.0 + u[0] + u[1]
        return np.array([s - safe, s - (1.0 + xi_bar)])

    problem = ChanceConstrainedProblem(
        name="portfolio",
        dim_u=2,
        cost=cost,
        cost_grad=cost_grad,
        constraint=constraint,
        constraint_grad=constraint_grad,
        threshold=0.0,
        prob_level=pi,
        admissible=AdmissibleBox(np.zeros(2), np.ones(2)),
        noise=noise,
        linear_dualized=((np.ones(2), 1.0),),
        prob_oracle=prob_oracle,
        prob_grad_oracle=prob_grad_oracle,
        mean_cost_grad=mean_cost_grad,
        params={"l": l, "b": b, "xi_bar": xi_bar, "sigma": sigma, "pi": pi},
    )
    saddle = _portfolio_saddle_or_none(problem)
    object.__setattr__(problem, "reference_saddle", saddle)
    return problem


def _portfolio_saddle_or_none(problem):
    try:
        return solve_portfolio_saddle(problem)
    except (ValidationError, OracleUnavailableError):
        return None


def solve_portfolio_saddle(problem: ChanceConstrainedProblem):
    """Primal-dual optimum of the portfolio instance, in the regime where
    the safe asset sits at its lower bound and the probability constraint
    saturates.

    With u = 0 the saturation P(0, v) = pi pins v through the noise
    quantile; stationarity in v then gives the probability multiplier.
    Validity (v in (0, 1), positive multiplier, inward u-gradient) is
    checked and a ValidationError raised outside the regime.
    """
    if problem.name != "portfolio":
        raise ValidationError("saddle solver only covers the portfolio instance")
    p = problem.params
    debt, safe, pi = 1.0 + p["l"], 1.0 + p["b"], p["pi"]
    # P(0, v) = 1 - F(debt/v - 1) = pi  =>  v = debt / (1 + F^{-1}(1 - pi))
    x = quintic_quantile(1.0 - pi, p["xi_bar"], p["sigma"])
    if x <= -1.0:
        raise ValidationError("probability level outside the saturated regime")
    v = debt / (1.0 + x)
    if not (0.0 < v < 1.0):
        raise ValidationError("saturated solution leaves the admissible box")
    u_opt = np.array([0.0, v])
    grad_p = problem.prob_grad_oracle(u_opt)
    mean_grad = problem.mean_cost_grad(u_opt)
    lam2 = mean_grad[1] / grad_p[1]
    if lam2 < 0.0:
        raise ValidationError("negative probability multiplier: wrong regime")
    if mean_grad[0] - lam2 * grad_p[0] < 0.0:
        raise ValidationError("safe-asset bound not active: wrong regime")
    return u_opt, np.array([0.0, lam2])


# ---------------------------------------------------------------------------
# toy instance

def make_toy_problem(pi: float = 0.7) -> ChanceConstrainedProblem:
    """One-dimensional problem min (u-1)^2/2 s.t. P(u <= xi) >= pi with
    xi normal of mean -2 and standard deviation 0.1."""
    mean, sd = -2.0, 0.1
    noise = gaussian_noise(mean, sd)

    def cost(u, xi):
        return 0.5 * (u[0] - 1.0) ** 2

    def cost_grad(u, xi):
        return np.array([u[0] - 1.0])

    def constraint(u, xi):
        return u[0] - xi

    def constraint_grad(u, xi):
        return np.array([1.0])

    def prob_oracle(u):
        return 1.0 - stats.norm.cdf((u[0] - mean) / sd)

    def prob_grad_oracle(u):
        return np.array([-stats.norm.pdf((u[0] - mean) / sd) / sd])

    def mean_cost_grad(u):
        return np.array([u[0] - 1.0])

    # saturated KT point: u at the (1-pi) quantile, lambda from stationarity
    u_opt = mean + sd * stats.norm.ppf(1.0 - pi)
    lam_opt = (1.0 - u_opt) * sd / stats.norm.pdf((u_opt - mean) / sd)

    return ChanceConstrainedProblem(
        name="toy",
        dim_u=1,
        cost=cost,
        cost_grad=cost_grad,
        constraint=constraint,
        constraint_grad=constraint_grad,
        threshold=0.0,
        prob_level=pi,
        admissible=AdmissibleBox(np.array([-np.inf]), np.array([np.inf])),
        noise=noise,
        prob_oracle=prob_oracle,
        prob_grad_oracle=prob_grad_oracle,
        mean_cost_grad=mean_cost_grad,
        reference_saddle=(np.array([u_opt]), np.array([lam_opt])),
        params={"mean": mean, "sd": sd, "pi": pi},
    )


_FACTORIES = {
    "portfolio": make_portfolio_problem,
    "toy": make_toy_problem,
}


def make_problem(name: str, **overrides) -> ChanceConstrainedProblem:
    """Build a named instance ('portfolio' or 'toy') with parameter overrides."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValidationError(
            f"unknown problem {name!r}; choose one of: {', '.join(_FACTORIES)}"
        ) from None
    import inspect

    allowed = set(inspect.signature(factory).parameters)
    unknown = set(overrides) - allowed
    if unknown:
        raise ValidationError(
            f"unknown override(s) for problem {name!r}: {sorted(unknown)}"
        )
    return factory(**overrides)
