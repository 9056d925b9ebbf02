"""Shared fixtures: the two-feature market of the figures and seeded random market generators."""
import os
import sys

import numpy as np
import pytest

# Add the repository root to the path to import modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from acceptance_suite import interior_market, random_market, random_profile, two_feature_market  # noqa: E402
from model import MarketSpec  # noqa: E402


def figure_market(L=14.0, n=1):
    """A = diag(3, 7), b = 0; influence L split evenly over n agents."""
    return MarketSpec(lam=np.full(n, L / n), theta0=np.zeros(2), A=np.diag([3.0, 7.0]), c=np.zeros(2))


@pytest.fixture
def market():
    return figure_market()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_random_market(rng):
    return lambda n=2, d=3: random_market(rng, n, d)


@pytest.fixture
def make_interior_market(rng):
    return lambda n=2, d=3: interior_market(rng, n, d)


@pytest.fixture
def make_two_feature_market(rng):
    return lambda n=1: two_feature_market(rng, n)


@pytest.fixture
def make_random_profile(rng):
    return lambda n, d, boundary=False: random_profile(rng, n, d, boundary)
