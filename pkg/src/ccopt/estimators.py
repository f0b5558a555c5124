"""Single-sample stochastic estimates of P(u) and grad P(u).

Three estimators share the indicator convention I(theta <= alpha) = 1 on
the boundary:

  * raw indicator        -- unbiased estimate of P(u)
  * convolution (AC)     -- kernel-smoothed indicator; closed forms
                            1 - H((theta-alpha)/r) for P and
                            -(1/r) h((theta-alpha)/r) theta'_u for grad P
  * finite difference (FD) -- symmetric indicator difference with step c
                            per coordinate, reusing the same sample for
                            both sides to cut variance

AC carries an O(r^2) bias and O(1/r) variance; FD an O(c^2) bias and
O(1/c) variance when the constraint responds to the noise at the
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .kernels import MollifierKernel, kernel_by_name
from .problem import ChanceConstrainedProblem

__all__ = [
    "EstimatorConfig",
    "indicator_estimate",
    "ac_probability_estimate",
    "ac_gradient_estimate",
    "fd_gradient_estimate",
    "probability_estimate",
    "gradient_estimate",
]

DUAL_MODES = ("indicator", "mollified")


@dataclass(frozen=True)
class EstimatorConfig:
    """Which gradient estimator drives the primal update, and which
    probability estimate feeds the dual update.

    kind       'ac' or 'fd'
    kernel     bump used by AC (ignored by FD)
    smoothing  radius r (AC) or step c (FD); strictly positive
    dual_estimate_mode  'indicator' (unbiased) or 'mollified' (AC only)
    """

    kind: str
    smoothing: float
    kernel: Optional[MollifierKernel] = None
    dual_estimate_mode: str = "indicator"

    def __post_init__(self):
        if self.kind not in ("ac", "fd"):
            raise ValidationError(f"estimator kind must be 'ac' or 'fd', got {self.kind!r}")
        if not self.smoothing > 0:
            raise ValidationError(f"smoothing must be positive, got {self.smoothing}")
        if self.dual_estimate_mode not in DUAL_MODES:
            raise ValidationError(f"unknown dual_estimate_mode {self.dual_estimate_mode!r}")
        if self.kind == "ac" and self.kernel is None:
            object.__setattr__(self, "kernel", kernel_by_name("parabolic"))
        if self.kind == "fd" and self.dual_estimate_mode == "mollified":
            raise ValidationError("the finite-difference estimator has no mollified P-estimate")

    def with_smoothing(self, value: float) -> "EstimatorConfig":
        return EstimatorConfig(self.kind, value, self.kernel, self.dual_estimate_mode)


def indicator_estimate(problem: ChanceConstrainedProblem, u, xi) -> float:
    """1 if theta(u, xi) <= alpha else 0 (closed inequality)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return 1.0 if problem.constraint(u, xi) <= problem.threshold else 0.0


def ac_probability_estimate(
    problem: ChanceConstrainedProblem, u, xi, kernel: MollifierKernel, r: float
) -> float:
    """Smoothed indicator 1 - H((theta - alpha)/r); lies in [0, 1] and
    decreases in theta."""
    if not r > 0:
        raise ValidationError("smoothing radius must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z = (problem.constraint(u, xi) - problem.threshold) / r
    return 1.0 - float(kernel.cumulative(z))


def ac_gradient_estimate(
    problem: ChanceConstrainedProblem, u, xi, kernel: MollifierKernel, r: float
) -> np.ndarray:
    """-(1/r) h((theta - alpha)/r) theta'_u, a biased estimate of grad P(u).

    Zero whenever theta is more than r away from the threshold.
    """
    if not r > 0:
        raise ValidationError("smoothing radius must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z = (problem.constraint(u, xi) - problem.threshold) / r
    w = float(kernel.evaluate(z))
    if w == 0.0:
        return np.zeros(problem.dim_u)
    return -(w / r) * np.asarray(problem.constraint_grad(u, xi), dtype=float)


def fd_gradient_estimate(
    problem: ChanceConstrainedProblem, u, xi, c: float
) -> np.ndarray:
    """Symmetric indicator difference per coordinate with shared sample.

    Component j is [I(theta(u + c e_j) <= alpha) - I(theta(u - c e_j) <= alpha)] / 2c,
    so each entry is one of -1/2c, 0, +1/2c.
    """
    if not c > 0:
        raise ValidationError("difference step must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    alpha = problem.threshold
    out = np.zeros(problem.dim_u)
    for j in range(problem.dim_u):
        shifted = u.copy()
        shifted[j] = u[j] + c
        plus = 1.0 if problem.constraint(shifted, xi) <= alpha else 0.0
        shifted[j] = u[j] - c
        minus = 1.0 if problem.constraint(shifted, xi) <= alpha else 0.0
        out[j] = (plus - minus) / (2.0 * c)
    return out


def probability_estimate(
    problem: ChanceConstrainedProblem, u, xi, config: EstimatorConfig
) -> float:
    """P-estimate feeding the dual update, per the configured mode."""
    if config.dual_estimate_mode == "mollified":
        return ac_probability_estimate(problem, u, xi, config.kernel, config.smoothing)
    return indicator_estimate(problem, u, xi)


def gradient_estimate(
    problem: ChanceConstrainedProblem, u, xi, config: EstimatorConfig
) -> np.ndarray:
    """grad-P estimate feeding the primal update."""
    if config.kind == "ac":
        return ac_gradient_estimate(problem, u, xi, config.kernel, config.smoothing)
    return fd_gradient_estimate(problem, u, xi, config.smoothing)
