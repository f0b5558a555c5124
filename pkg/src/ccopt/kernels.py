"""Catalog of compactly supported smoothing kernels.

Every kernel is an even, nonnegative bump with unit mass and support
[-1, 1].  Second moments and squared L2 norms are stored in closed form;
the quality score sigma_h^(4/5) * ||h||_L2^(8/5) ranks kernels for use in
convolution smoothing of an indicator (smaller is better).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "MollifierKernel",
    "builtin_kernels",
    "kernel_by_name",
    "kernel_score",
    "best_kernel",
]


@dataclass(frozen=True)
class MollifierKernel:
    """An even unit-mass bump h with support [-1, 1] and cached moments.

    evaluate(x)   -> h(x)
    cumulative(x) -> integral of h from -inf to x, clamped to [0, 1]
    sigma2        -> integral of x^2 h(x) dx
    l2norm2       -> integral of h(x)^2 dx
    """

    name: str
    evaluate: Callable[[float], float] = field(repr=False)
    cumulative: Callable[[float], float] = field(repr=False)
    sigma2: float
    l2norm2: float

    def peak(self) -> float:
        """h(0), the maximum of the bump."""
        return float(self.evaluate(0.0))


def _supported(fn):
    """Wrap a bump formula so it vanishes outside [-1, 1] (array-safe,
    with a branch-only fast path for scalars)."""

    def h(x):
        if np.ndim(x) == 0:
            xf = float(x)
            return float(fn(xf)) if -1.0 <= xf <= 1.0 else 0.0
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= 1.0
        return np.where(inside, fn(np.where(inside, x, 0.0)), 0.0)

    return h


def _clamped_cdf(fn):
    """Wrap a cumulative formula: 0 below -1, 1 above 1."""

    def H(x):
        if np.ndim(x) == 0:
            xf = float(x)
            if xf <= -1.0:
                return 0.0
            if xf >= 1.0:
                return 1.0
            return float(fn(xf))
        x = np.asarray(x, dtype=float)
        return np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, fn(np.clip(x, -1.0, 1.0))))

    return H


def _triangular_cdf(x):
    return np.where(x <= 0.0, (1.0 + x) ** 2 / 2.0, 1.0 - (1.0 - x) ** 2 / 2.0)


_CATALOG = [
    MollifierKernel(
        name="uniform",
        evaluate=_supported(lambda x: 0.5 * np.ones_like(x)),
        cumulative=_clamped_cdf(lambda x: (x + 1.0) / 2.0),
        sigma2=1.0 / 3.0,
        l2norm2=1.0 / 2.0,
    ),
    MollifierKernel(
        name="triangular",
        evaluate=_supported(lambda x: 1.0 - np.abs(x)),
        cumulative=_clamped_cdf(_triangular_cdf),
        sigma2=1.0 / 6.0,
        l2norm2=2.0 / 3.0,
    ),
    MollifierKernel(
        name="cosine",
        evaluate=_supported(lambda x: (math.pi / 4.0) * np.cos(math.pi * x / 2.0)),
        cumulative=_clamped_cdf(lambda x: (1.0 + np.sin(math.pi * x / 2.0)) / 2.0),
        sigma2=1.0 - 8.0 / math.pi**2,
        l2norm2=math.pi**2 / 16.0,
    ),
    MollifierKernel(
        name="parabolic",
        evaluate=_supported(lambda x: 0.75 * (1.0 - x**2)),
        cumulative=_clamped_cdf(lambda x: (2.0 + 3.0 * x - x**3) / 4.0),
        sigma2=1.0 / 5.0,
        l2norm2=3.0 / 5.0,
    ),
    MollifierKernel(
        name="quartic",
        evaluate=_supported(lambda x: (15.0 / 16.0) * (1.0 - x**2) ** 2),
        cumulative=_clamped_cdf(lambda x: (3.0 * x**5 - 10.0 * x**3 + 15.0 * x + 8.0) / 16.0),
        sigma2=1.0 / 7.0,
        l2norm2=5.0 / 7.0,
    ),
    MollifierKernel(
        name="sextic",
        evaluate=_supported(lambda x: (35.0 / 32.0) * (1.0 - x**2) ** 3),
        cumulative=_clamped_cdf(
            lambda x: (-5.0 * x**7 + 21.0 * x**5 - 35.0 * x**3 + 35.0 * x + 16.0) / 32.0
        ),
        sigma2=1.0 / 9.0,
        l2norm2=350.0 / 429.0,
    ),
]


def builtin_kernels() -> list[MollifierKernel]:
    """The six bump functions of the catalog, from flattest to most peaked."""
    return list(_CATALOG)


def kernel_by_name(name: str) -> MollifierKernel:
    for k in _CATALOG:
        if k.name == name:
            return k
    known = ", ".join(k.name for k in _CATALOG)
    raise KeyError(f"unknown kernel {name!r}; choose one of: {known}")


def kernel_score(kernel: MollifierKernel) -> float:
    """sigma_h^(4/5) * ||h||_L2^(8/5), computed from the stored moments."""
    return kernel.sigma2**0.4 * kernel.l2norm2**0.8


def best_kernel(tie_tol: float = 1e-6) -> MollifierKernel:
    """Kernel minimizing the score; ties within tie_tol go to catalog order."""
    best = _CATALOG[0]
    best_score = kernel_score(best)
    for k in _CATALOG[1:]:
        s = kernel_score(k)
        if s < best_score - tie_tol:
            best, best_score = k, s
    return best
