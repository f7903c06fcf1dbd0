"""Shared helpers for the randomized-input test harness (fixed seeds)."""

import numpy as np
import pytest

from oucv import CovarianceParams, Design, from_points, sample_path


def random_design(rng: np.random.Generator, n: int) -> Design:
    """Design with symmetric-Dirichlet gaps."""
    gaps = rng.dirichlet(np.ones(n - 1))
    pts = np.concatenate([[0.0], np.cumsum(gaps)])
    pts[-1] = 1.0
    return from_points(pts)


def random_instance(rng: np.random.Generator, n_lo=5, n_hi=40):
    """(design, y, theta, sigma2) with the acceptance-criterion ranges."""
    n = int(rng.integers(n_lo, n_hi + 1))
    design = random_design(rng, n)
    theta = float(rng.uniform(0.1, 10.0))
    sigma2 = float(rng.uniform(0.3, 30.0))
    y = sample_path(design, CovarianceParams(theta=3.0, sigma2=1.0), int(rng.integers(2**32)))
    return design, y, theta, sigma2


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
