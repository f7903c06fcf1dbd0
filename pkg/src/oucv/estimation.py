"""Box-constrained minimization of the cross-validation and likelihood objectives.

Both objectives share the shape n log s2 + L(theta) + Q(theta) / s2, so
the variance profiles out in closed form (Q/n clamped into the box) and
the remaining one-dimensional problem is solved by a deterministic
coarse grid followed by golden-section refinement. The three classical
cases are covered: joint estimation, fixed variance, fixed inverse
length scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .designs import Design
from .errors import InvalidParameterError, NumericalFailureError
from .numerics import golden_section_minimize
from .scoring import (
    ScoreDecomposition,
    ml_decomposition,
    ml_gradient_theta,
    score_decomposition,
    score_gradient_theta,
)

__all__ = [
    "ParameterBox",
    "EstimateResult",
    "profile_sigma2",
    "estimate_cv_joint",
    "estimate_cv_fixed_sigma",
    "estimate_cv_fixed_theta",
    "estimate_ml_joint",
    "standardized_statistic",
]

_GRID_SIZE = 64
_REFINE_RTOL = 1e-8
# relative slack when deciding whether an estimate sits on a box edge
_BOUNDARY_RTOL = 1e-8


@dataclass(frozen=True)
class ParameterBox:
    """Compact rectangle [a, A] x [b, B] constraining (theta, sigma2)."""

    a: float
    A: float
    b: float
    B: float

    def __post_init__(self):
        if not (0.0 < self.a <= self.A < math.inf):
            raise InvalidParameterError(f"invalid theta bounds [{self.a}, {self.A}]")
        if not (0.0 < self.b <= self.B < math.inf):
            raise InvalidParameterError(f"invalid sigma2 bounds [{self.b}, {self.B}]")

    @property
    def theta_range(self) -> tuple[float, float]:
        return (self.a, self.A)

    @property
    def sigma2_range(self) -> tuple[float, float]:
        return (self.b, self.B)


@dataclass(frozen=True)
class EstimateResult:
    """Minimizer coordinates, their product, and convergence diagnostics."""

    theta_hat: float
    sigma2_hat: float
    product: float
    objective_value: float
    gradient_at_opt: float
    boundary_flags: tuple[str, ...]
    iterations: int


def profile_sigma2(decomp: ScoreDecomposition, box: ParameterBox) -> float:
    """Closed-form variance minimizer Q/n, clamped into [b, B]."""
    return float(min(max(decomp.Q / decomp.n, box.b), box.B))


def standardized_statistic(product_hat: float, true_product: float, n: int, tau: float) -> float:
    """sqrt(n) (product_hat - true_product) / (true_product * tau)."""
    if not tau > 0.0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n}")
    return float(math.sqrt(n) * (product_hat - true_product) / (true_product * tau))


def _sigma_flags(sigma2: float, box: ParameterBox) -> list[str]:
    flags = []
    if sigma2 <= box.b * (1.0 + _BOUNDARY_RTOL):
        flags.append("sigma2_lower")
    if sigma2 >= box.B * (1.0 - _BOUNDARY_RTOL):
        flags.append("sigma2_upper")
    return flags


def _theta_flags(theta: float, box: ParameterBox) -> list[str]:
    flags = []
    if theta <= box.a * (1.0 + _BOUNDARY_RTOL):
        flags.append("theta_lower")
    if theta >= box.A * (1.0 - _BOUNDARY_RTOL):
        flags.append("theta_upper")
    return flags


def _minimize_theta(
    objective: Callable[[float], float], lo: float, hi: float
) -> tuple[float, float, int]:
    """Coarse log-spaced grid plus golden-section refinement on the bracket.

    The returned point never scores worse than any grid node; ties go to
    the smaller theta.
    """
    if lo == hi:
        return lo, objective(lo), 0
    grid = np.geomspace(lo, hi, _GRID_SIZE)
    values = np.array([objective(t) for t in grid])
    if not np.all(np.isfinite(values)):
        bad = float(grid[int(np.flatnonzero(~np.isfinite(values))[0])])
        raise NumericalFailureError(
            f"objective is not finite at theta = {bad}", theta=bad
        )
    k = int(np.argmin(values))  # first minimum: tie toward smaller theta
    left = grid[max(k - 1, 0)]
    right = grid[min(k + 1, grid.size - 1)]
    x, fx, iters = golden_section_minimize(objective, float(left), float(right), rel_tol=_REFINE_RTOL)
    if values[k] < fx or (values[k] == fx and grid[k] < x):
        return float(grid[k]), float(values[k]), iters
    return float(x), float(fx), iters


def _profile_estimate(
    design: Design,
    y,
    box: ParameterBox,
    decomp_fn: Callable[[Design, np.ndarray, float], ScoreDecomposition],
    gradient_fn: Callable[[Design, np.ndarray, float, float], float],
) -> EstimateResult:
    def profile_objective(theta: float) -> float:
        d = decomp_fn(design, y, theta)
        s2 = profile_sigma2(d, box)
        return d.score_at(s2)

    theta_hat, value, iters = _minimize_theta(profile_objective, box.a, box.A)
    d = decomp_fn(design, y, theta_hat)
    sigma2_hat = profile_sigma2(d, box)
    grad = gradient_fn(design, y, theta_hat, sigma2_hat)
    flags = _theta_flags(theta_hat, box) + _sigma_flags(sigma2_hat, box)
    return EstimateResult(
        theta_hat=theta_hat,
        sigma2_hat=sigma2_hat,
        product=theta_hat * sigma2_hat,
        objective_value=value,
        gradient_at_opt=grad,
        boundary_flags=tuple(flags),
        iterations=iters,
    )


def estimate_cv_joint(design: Design, y, box: ParameterBox) -> EstimateResult:
    """Joint score minimizer over the box; estimates the product theta * sigma2.

    Separately theta and sigma2 are not identified under infill
    sampling, so only the product coordinate of the result is
    consistent.
    """
    return _profile_estimate(design, y, box, score_decomposition, score_gradient_theta)


def estimate_cv_fixed_sigma(
    design: Design, y, sigma1_sq: float, theta_range: tuple[float, float]
) -> EstimateResult:
    """Score minimizer in theta at a predetermined variance.

    The estimand is theta0 * sigma0^2 / sigma1_sq: fixing the variance
    at the wrong level rescales the target inverse length scale.
    """
    if not (np.isfinite(sigma1_sq) and sigma1_sq > 0.0):
        raise InvalidParameterError(f"sigma1_sq must be positive, got {sigma1_sq}")
    lo, hi = theta_range
    box = ParameterBox(a=lo, A=hi, b=sigma1_sq, B=sigma1_sq)

    def objective(theta: float) -> float:
        return score_decomposition(design, y, theta).score_at(sigma1_sq)

    theta_hat, value, iters = _minimize_theta(objective, box.a, box.A)
    grad = score_gradient_theta(design, y, theta_hat, sigma1_sq)
    return EstimateResult(
        theta_hat=theta_hat,
        sigma2_hat=sigma1_sq,
        product=theta_hat * sigma1_sq,
        objective_value=value,
        gradient_at_opt=grad,
        boundary_flags=tuple(_theta_flags(theta_hat, box)),
        iterations=iters,
    )


def estimate_cv_fixed_theta(
    design: Design, y, theta2: float, sigma_range: tuple[float, float]
) -> EstimateResult:
    """Closed-form score minimizer in sigma2 at a predetermined theta.

    The estimand is theta0 * sigma0^2 / theta2. The optimum is the
    clamped profile value, so no search is needed; the reported gradient
    is the sigma2-derivative of the score at the optimum.
    """
    if not (np.isfinite(theta2) and theta2 > 0.0):
        raise InvalidParameterError(f"theta2 must be positive, got {theta2}")
    lo, hi = sigma_range
    box = ParameterBox(a=theta2, A=theta2, b=lo, B=hi)
    d = score_decomposition(design, y, theta2)
    sigma2_hat = profile_sigma2(d, box)
    value = d.score_at(sigma2_hat)
    grad = d.n / sigma2_hat - d.Q / (sigma2_hat * sigma2_hat)
    return EstimateResult(
        theta_hat=theta2,
        sigma2_hat=sigma2_hat,
        product=theta2 * sigma2_hat,
        objective_value=float(value),
        gradient_at_opt=float(grad),
        boundary_flags=tuple(_sigma_flags(sigma2_hat, box)),
        iterations=0,
    )


def estimate_ml_joint(design: Design, y, box: ParameterBox) -> EstimateResult:
    """Maximum-likelihood analog of :func:`estimate_cv_joint`.

    Same profile scheme applied to the Markov-factorized -2
    log-likelihood; serves as the variance baseline the score-based
    estimator is compared against.
    """
    return _profile_estimate(design, y, box, ml_decomposition, ml_gradient_theta)
