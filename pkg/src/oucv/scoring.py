"""Matrix-free evaluation of the leave-one-out logarithmic score.

The Markov structure of the exponential kernel makes the precision
matrix tridiagonal, so the full cross-validation score, its variance
decomposition, its analytic derivative in the inverse length scale, and
the Gaussian likelihood all cost O(n). A deliberately independent dense
route (generic Cholesky on the full covariance) serves as the oracle
for all of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .designs import Design
from .errors import (
    ConditioningError,
    InvalidParameterError,
    NumericalFailureError,
)
from .numerics import log_one_minus_exp_neg, one_minus_exp_neg
from .simulate import covariance_matrix

__all__ = [
    "ScoreDecomposition",
    "LooSummary",
    "TridiagonalPrecision",
    "precision_matrix",
    "loo_predictions",
    "log_score",
    "score_decomposition",
    "score_gradient_theta",
    "ml_neg2loglik",
    "ml_decomposition",
    "ml_gradient_theta",
    "dense_precision",
    "dense_oracle_score",
    "dense_oracle_ml",
]

_DENSE_MAX_N = 2000
# Cholesky pivot min/max below this means the covariance is numerically
# singular (near-duplicate points); the dense oracle refuses to answer
_PIVOT_RATIO_MIN = 1e-5


@dataclass(frozen=True)
class ScoreDecomposition:
    """Variance-free split of the score: S(theta, s2) = n log s2 + L + Q / s2."""

    L: float
    Q: float
    n: int

    def score_at(self, sigma2: float) -> float:
        return self.n * np.log(sigma2) + self.L + self.Q / sigma2


@dataclass(frozen=True)
class LooSummary:
    """Leave-one-out predictions and unit-variance conditional variances.

    ``normalized_variances[i]`` times sigma^2 is the conditional
    variance of observation i given all others.
    """

    predictions: np.ndarray
    normalized_variances: np.ndarray


@dataclass(frozen=True)
class TridiagonalPrecision:
    """Symmetric tridiagonal inverse of the unit-variance covariance."""

    diag: np.ndarray
    off: np.ndarray

    def to_dense(self) -> np.ndarray:
        n = self.diag.size
        M = np.zeros((n, n))
        M[np.arange(n), np.arange(n)] = self.diag
        M[np.arange(n - 1), np.arange(1, n)] = self.off
        M[np.arange(1, n), np.arange(n - 1)] = self.off
        return M

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.diag * x
        out[:-1] += self.off * x[1:]
        out[1:] += self.off * x[:-1]
        return out

    def apply_to_columns(self, M: np.ndarray) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        out = self.diag[:, None] * M
        out[:-1] += self.off[:, None] * M[1:]
        out[1:] += self.off[:, None] * M[:-1]
        return out


def _check_theta(theta: float) -> None:
    if not (np.isfinite(theta) and theta > 0.0):
        raise InvalidParameterError(f"theta must be positive and finite, got {theta}")


def _check_sigma2(sigma2: float) -> None:
    if not (np.isfinite(sigma2) and sigma2 > 0.0):
        raise InvalidParameterError(f"sigma2 must be positive and finite, got {sigma2}")


def _check_data(design: Design, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (design.n,):
        raise InvalidParameterError(
            f"data length {y.shape} does not match design size {design.n}"
        )
    if not np.all(np.isfinite(y)):
        raise NumericalFailureError("nonfinite values in the observation vector")
    return y


def _kernel_arrays(design: Design, theta: float):
    """Per-gap decay E, one-minus-squared-decay G, and its reciprocal."""
    g = design.gaps
    E = np.exp(-theta * g)
    G = one_minus_exp_neg(2.0 * theta * g)
    return g, E, G, 1.0 / G


def precision_matrix(design: Design, theta: float) -> TridiagonalPrecision:
    """Tridiagonal inverse of the unit-variance covariance matrix.

    Corner diagonal entries are 1/(1 - e^{-2 theta gap}); an interior
    entry is the sum of the two adjacent corner-type terms minus one,
    and the off-diagonal is -e^{-theta gap}/(1 - e^{-2 theta gap}).
    """
    _check_theta(theta)
    _, E, _, a = _kernel_arrays(design, theta)
    diag = np.empty(design.n, dtype=float)
    diag[0] = a[0]
    diag[-1] = a[-1]
    # a_i + a_{i+1} e^{-2 theta gap_{i+1}} == a_i + a_{i+1} - 1 exactly
    diag[1:-1] = a[:-1] + a[1:] - 1.0
    return TridiagonalPrecision(diag=diag, off=-a * E)


def loo_predictions(design: Design, y, theta: float) -> LooSummary:
    """Leave-one-out conditional means and normalized variances.

    Each interior prediction is the precision-weighted combination of
    the two neighbors; the endpoints condition on their single
    neighbor. No dependence on the variance parameter.
    """
    _check_theta(theta)
    y = _check_data(design, y)
    n = design.n
    _, E, G, a = _kernel_arrays(design, theta)
    A = a[:-1] + a[1:] - 1.0
    c = a * E  # negated off-diagonal weights
    preds = np.empty(n, dtype=float)
    preds[0] = E[0] * y[1]
    preds[-1] = E[-1] * y[-2]
    preds[1:-1] = (c[:-1] * y[:-2] + c[1:] * y[2:]) / A
    v = np.empty(n, dtype=float)
    v[0] = G[0]
    v[-1] = G[-1]
    v[1:-1] = 1.0 / A
    return LooSummary(predictions=preds, normalized_variances=v)


def log_score(design: Design, y, theta: float, sigma2: float) -> float:
    """Cross-validation logarithmic score, matrix-free in O(n).

    Sums, over every observation, the log conditional variance plus the
    squared leave-one-out residual divided by that variance.
    """
    _check_theta(theta)
    _check_sigma2(sigma2)
    y = _check_data(design, y)
    n = design.n
    g, E, G, a = _kernel_arrays(design, theta)
    A = a[:-1] + a[1:] - 1.0
    c = a * E
    w_left = y[0] - E[0] * y[1]
    w_right = y[-1] - E[-1] * y[-2]
    resid = y[1:-1] - (c[:-1] * y[:-2] + c[1:] * y[2:]) / A
    two_tg = 2.0 * theta * g
    with np.errstate(over="ignore", invalid="ignore"):
        value = (
            n * np.log(sigma2)
            + log_one_minus_exp_neg(two_tg[0])
            + log_one_minus_exp_neg(two_tg[-1])
            + w_left * w_left / (sigma2 * G[0])
            + w_right * w_right / (sigma2 * G[-1])
            - float(np.sum(np.log(A)))
            + float(np.sum(A * resid * resid / sigma2))
        )
    if not np.isfinite(value):
        raise NumericalFailureError("logarithmic score is not finite", theta=theta)
    return float(value)


def score_decomposition(design: Design, y, theta: float) -> ScoreDecomposition:
    """Split the score into its variance-free log part L and quadratic part Q.

    The identity n log sigma2 + L + Q / sigma2 == log_score holds as an
    exact algebraic regrouping; Q is a positively weighted sum of
    squares, hence nonnegative.
    """
    _check_theta(theta)
    y = _check_data(design, y)
    g, E, G, a = _kernel_arrays(design, theta)
    A = a[:-1] + a[1:] - 1.0
    c = a * E
    w_left = y[0] - E[0] * y[1]
    w_right = y[-1] - E[-1] * y[-2]
    resid = y[1:-1] - (c[:-1] * y[:-2] + c[1:] * y[2:]) / A
    two_tg = 2.0 * theta * g
    L = (
        log_one_minus_exp_neg(two_tg[0])
        + log_one_minus_exp_neg(two_tg[-1])
        - float(np.sum(np.log(A)))
    )
    with np.errstate(over="ignore", invalid="ignore"):
        Q = (
            a[0] * w_left * w_left
            + a[-1] * w_right * w_right
            + float(np.sum(A * resid * resid))
        )
    return ScoreDecomposition(L=float(L), Q=float(Q), n=design.n)


def score_gradient_theta(design: Design, y, theta: float, sigma2: float) -> float:
    """Analytic derivative of the score in theta, term by term.

    Differentiates the matrix-free expression directly; agreement with a
    central finite difference is enforced by the test oracles.
    """
    _check_theta(theta)
    _check_sigma2(sigma2)
    y = _check_data(design, y)
    g, E, G, a = _kernel_arrays(design, theta)
    dG = 2.0 * g * (1.0 - G)  # d/dtheta (1 - e^{-2 theta g})
    da = -dG * a * a
    dE = -g * E
    A = a[:-1] + a[1:] - 1.0
    dA = da[:-1] + da[1:]
    c = a * E
    dc = da * E + a * dE

    num = c[:-1] * y[:-2] + c[1:] * y[2:]
    dnum = dc[:-1] * y[:-2] + dc[1:] * y[2:]
    resid = y[1:-1] - num / A
    dresid = -(dnum * A - num * dA) / (A * A)

    w_left = y[0] - E[0] * y[1]
    dw_left = g[0] * E[0] * y[1]
    w_right = y[-1] - E[-1] * y[-2]
    dw_right = g[-1] * E[-1] * y[-2]

    d_logs = dG[0] * a[0] + dG[-1] * a[-1] - float(np.sum(dA / A))
    d_quad = (
        da[0] * w_left * w_left
        + 2.0 * a[0] * w_left * dw_left
        + da[-1] * w_right * w_right
        + 2.0 * a[-1] * w_right * dw_right
        + float(np.sum(dA * resid * resid + 2.0 * A * resid * dresid))
    )
    return float(d_logs + d_quad / sigma2)


def ml_neg2loglik(design: Design, y, theta: float, sigma2: float) -> float:
    """Twice the negative Gaussian log-likelihood, via the Markov factorization.

    Each observation conditions on its left neighbor only, giving
    n log(2 pi sigma2) plus per-gap log variances plus the normalized
    squared innovations, all in O(n).
    """
    _check_theta(theta)
    _check_sigma2(sigma2)
    y = _check_data(design, y)
    n = design.n
    g, E, G, _ = _kernel_arrays(design, theta)
    W = y[1:] - E * y[:-1]
    with np.errstate(over="ignore", invalid="ignore"):
        value = (
            n * np.log(2.0 * np.pi * sigma2)
            + float(np.sum(log_one_minus_exp_neg(2.0 * theta * g)))
            + (y[0] * y[0] + float(np.sum(W * W / G))) / sigma2
        )
    if not np.isfinite(value):
        raise NumericalFailureError("likelihood objective is not finite", theta=theta)
    return float(value)


def ml_decomposition(design: Design, y, theta: float) -> ScoreDecomposition:
    """Variance-free split of the likelihood objective, same shape as the score's."""
    _check_theta(theta)
    y = _check_data(design, y)
    g, E, G, _ = _kernel_arrays(design, theta)
    W = y[1:] - E * y[:-1]
    L = design.n * np.log(2.0 * np.pi) + float(np.sum(log_one_minus_exp_neg(2.0 * theta * g)))
    with np.errstate(over="ignore", invalid="ignore"):
        Q = y[0] * y[0] + float(np.sum(W * W / G))
    return ScoreDecomposition(L=float(L), Q=float(Q), n=design.n)


def ml_gradient_theta(design: Design, y, theta: float, sigma2: float) -> float:
    """Analytic theta-derivative of :func:`ml_neg2loglik`."""
    _check_theta(theta)
    _check_sigma2(sigma2)
    y = _check_data(design, y)
    g, E, G, _ = _kernel_arrays(design, theta)
    dG = 2.0 * g * (1.0 - G)
    W = y[1:] - E * y[:-1]
    dW = g * E * y[:-1]
    d_quad = np.sum((2.0 * W * dW - W * W * dG / G) / G)
    return float(np.sum(dG / G) + d_quad / sigma2)


def dense_precision(design: Design, theta: float) -> np.ndarray:
    """Dense inverse covariance through a generic Cholesky factorization.

    Independent of the tridiagonal closed form on purpose; n is capped
    and near-singular covariances (duplicate-like points) raise a
    conditioning error instead of returning noise.
    """
    _check_theta(theta)
    if design.n > _DENSE_MAX_N:
        raise InvalidParameterError(
            f"dense route is capped at n = {_DENSE_MAX_N}, got {design.n}"
        )
    R = covariance_matrix(design, theta)
    try:
        chol = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as err:
        raise ConditioningError(f"covariance factorization failed: {err}") from err
    piv = np.diag(chol)
    if float(piv.min() / piv.max()) < _PIVOT_RATIO_MIN:
        raise ConditioningError(
            "covariance is numerically singular (near-duplicate design points)"
        )
    identity = np.eye(design.n)
    return scipy.linalg.cho_solve((chol, True), identity)


def dense_oracle_score(design: Design, y, theta: float, sigma2: float) -> float:
    """Score computed the slow way: dense inverse plus the Dubrule identities."""
    _check_sigma2(sigma2)
    y = _check_data(design, y)
    P = dense_precision(design, theta)
    d = np.diag(P)
    resid = (P @ y) / d
    return float(np.sum(np.log(sigma2 / d) + d * resid * resid / sigma2))


def dense_oracle_ml(design: Design, y, theta: float, sigma2: float) -> float:
    """Gaussian -2 log-likelihood from the dense covariance."""
    _check_sigma2(sigma2)
    y = _check_data(design, y)
    _check_theta(theta)
    if design.n > _DENSE_MAX_N:
        raise InvalidParameterError(
            f"dense route is capped at n = {_DENSE_MAX_N}, got {design.n}"
        )
    R = covariance_matrix(design, theta)
    try:
        chol = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as err:
        raise ConditioningError(f"covariance factorization failed: {err}") from err
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    alpha = scipy.linalg.cho_solve((chol, True), y)
    n = design.n
    return float(n * np.log(2.0 * np.pi * sigma2) + logdet + y @ alpha / sigma2)
