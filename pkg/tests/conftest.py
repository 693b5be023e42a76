"""Shared fixtures and instance generators for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from menugame import MarketInstance


@pytest.fixture
def fig3_instance() -> MarketInstance:
    """N=5, M=3 reconstruction with strength factors (0.9, 0.8, 0.7, 0.6, 0.5)."""
    return MarketInstance(5, 3, 0.1, (1.0,) * 5, (0.1, 0.2, 0.3, 0.4, 0.5))


@pytest.fixture
def equal_sellers_instance() -> MarketInstance:
    """Three identical sellers (eta = 0.7 each), menu of two."""
    return MarketInstance(3, 2, 0.1, (1.0,) * 3, (0.3,) * 3)


def random_instance(
    rng: np.random.Generator,
    n_range=(3, 6),
    m_range=(1, 3),
    gamma_range=(0.05, 0.9),
    with_cost: bool = True,
) -> MarketInstance:
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    m = int(rng.integers(m_range[0], min(m_range[1], n) + 1))
    alpha = rng.uniform(0.5, 2.0, size=n)
    cost = rng.uniform(0.0, 0.3 / alpha) if with_cost else np.zeros(n)
    gamma = float(rng.uniform(*gamma_range))
    return MarketInstance(n, m, gamma, tuple(alpha), tuple(cost))


def random_profile(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.05, 0.95, size=n)


def tied_profile(rng: np.random.Generator, n: int) -> np.ndarray:
    """Profile with at least one exactly tied pair (requires common alpha)."""
    delta = rng.uniform(0.05, 0.95, size=n)
    i, j = rng.choice(n, size=2, replace=False)
    delta[j] = delta[i]
    if n >= 4 and rng.random() < 0.5:
        k = int(rng.integers(n))
        delta[k] = delta[i]
    return delta
