import random
from fractions import Fraction

import pytest

from pbpc.market import MarketInstance


def random_instance(rng: random.Random, n_max=4, m_max=12, den_max=8, n_min=1, name="rand"):
    """Feasible random instance: supplies k/d in (0, 1], total at least 1."""
    while True:
        n = rng.randint(n_min, n_max)
        m = rng.randint(1, m_max)
        supplies = []
        for _ in range(n):
            d = rng.randint(1, den_max)
            supplies.append(Fraction(rng.randint(1, d), d))
        if sum(supplies) >= 1:
            costs = [rng.randint(0, m) for _ in range(n)]
            return MarketInstance.from_lists(supplies, costs, m, name=name)


def random_profile(rng: random.Random, inst: MarketInstance):
    return [rng.randint(0, inst.max_bid) for _ in range(inst.n)]


@pytest.fixture
def rng():
    return random.Random(20240611)
