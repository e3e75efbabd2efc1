import numpy as np
import pytest

np.seterr(all="ignore")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def mc_se(p: float, n: int) -> float:
    """Binomial Monte Carlo standard error."""
    return float(np.sqrt(max(p * (1.0 - p), 1e-12) / n))
