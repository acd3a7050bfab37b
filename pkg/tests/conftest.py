import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pricediffusion import GridConfig, MarketSpec, ModelParams, solve  # noqa: E402


@pytest.fixture(scope="session")
def solved():
    """Cache of pricing solutions keyed by (p, q, C, T, n_points)."""
    cache = {}

    def get(p, q, C, T, n=2001):
        key = (p, q, C, T, n)
        if key not in cache:
            cache[key] = solve(MarketSpec(ModelParams(p, q), C, T), GridConfig(n_points=n))
        return cache[key]

    return get
