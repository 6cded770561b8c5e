import pytest

from blockeval.harness import build_synthetic_pool

SYNTHETIC_POOL_SIZE = 5000
SYNTHETIC_POOL_SEED = 7


@pytest.fixture(scope="session")
def synthetic_pool():
    """The bundled 5000-record surrogate pool (deterministic, seed 7)."""
    return build_synthetic_pool(size=SYNTHETIC_POOL_SIZE, seed=SYNTHETIC_POOL_SEED)
