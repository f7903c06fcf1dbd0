"""Exact sampling of the exponential-covariance process at a design.

The process is Markov, so a path is generated by the one-step
recursion y_i = e^{-theta * gap} * y_{i-1} + innovation, whose implied
finite-dimensional law is exactly N(0, sigma^2 * R_theta). A trend
variant adds a linear combination of known basis functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .designs import Design
from .errors import InvalidParameterError, LinearDependenceError
from .numerics import one_minus_exp_neg

__all__ = [
    "CovarianceParams",
    "TrendSpec",
    "polynomial_basis",
    "sample_path",
    "sample_with_trend",
    "covariance_matrix",
]

# relative threshold on pivoted-QR diagonals when checking basis rank
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class CovarianceParams:
    """Inverse length scale and variance of the exponential kernel."""

    theta: float
    sigma2: float

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta > 0.0):
            raise InvalidParameterError(f"theta must be positive, got {self.theta}")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0.0):
            raise InvalidParameterError(f"sigma2 must be positive, got {self.sigma2}")


@dataclass(frozen=True)
class TrendSpec:
    """Known mean-function basis with its coefficient vector.

    ``basis`` holds p callables on [0, 1] (twice continuously
    differentiable by contract); linear independence is checked
    numerically on each design through the rank of the evaluated
    matrix.
    """

    beta: np.ndarray
    basis: tuple[Callable[[np.ndarray], np.ndarray], ...]

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "basis", tuple(self.basis))
        if len(self.basis) < 1:
            raise InvalidParameterError("trend basis must contain at least one function")
        if beta.size != len(self.basis):
            raise InvalidParameterError(
                f"beta has {beta.size} entries for {len(self.basis)} basis functions"
            )

    @property
    def p(self) -> int:
        return len(self.basis)

    def design_matrix(self, design: Design) -> np.ndarray:
        """Evaluate the basis at the design points and check full rank."""
        F = np.column_stack([np.asarray(f(design.points), dtype=float) for f in self.basis])
        check_full_rank(F)
        return F


def check_full_rank(F: np.ndarray) -> None:
    """Raise if the columns of F are numerically dependent (pivoted QR)."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < F.shape[1]:
        raise LinearDependenceError(f"basis matrix of shape {F.shape} cannot have full column rank")
    _, R, _ = scipy.linalg.qr(F, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = float(np.linalg.norm(F))
    if scale == 0.0 or np.any(diag <= _RANK_TOL * scale):
        raise LinearDependenceError("basis functions are linearly dependent on this design")


def polynomial_basis(degree: int) -> tuple[Callable[[np.ndarray], np.ndarray], ...]:
    """Monomial basis (1, t, ..., t^degree)."""
    if degree < 0:
        raise InvalidParameterError(f"degree must be nonnegative, got {degree}")
    return tuple((lambda t, k=k: np.asarray(t, dtype=float) ** k) for k in range(degree + 1))


def sample_path(design: Design, params: CovarianceParams, seed) -> np.ndarray:
    """One exact draw of the centered process at the design points.

    ``seed`` feeds ``numpy.random.default_rng`` directly, so an integer
    or a (seed, replicate) tuple both define reproducible independent
    streams. Output is deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    n = design.n
    eps = rng.standard_normal(n)
    sd = np.sqrt(params.sigma2)
    decay = np.exp(-params.theta * design.gaps)
    innov_sd = sd * np.sqrt(one_minus_exp_neg(2.0 * params.theta * design.gaps))
    y = np.empty(n, dtype=float)
    y[0] = sd * eps[0]
    for i in range(1, n):
        y[i] = decay[i - 1] * y[i - 1] + innov_sd[i - 1] * eps[i]
    return y


def sample_with_trend(design: Design, params: CovarianceParams, trend: TrendSpec, seed) -> np.ndarray:
    """Trend-plus-noise draw z = F beta + y with y from :func:`sample_path`."""
    F = trend.design_matrix(design)
    return F @ trend.beta + sample_path(design, params, seed)


def covariance_matrix(design: Design, theta: float) -> np.ndarray:
    """Dense unit-variance covariance matrix exp(-theta |s_j - s_k|)."""
    if not (np.isfinite(theta) and theta > 0.0):
        raise InvalidParameterError(f"theta must be positive, got {theta}")
    s = design.points
    return np.exp(-theta * np.abs(s[:, None] - s[None, :]))
