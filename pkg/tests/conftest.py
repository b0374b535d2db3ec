import numpy as np
import pytest


@pytest.fixture()
def rng():
    """Fresh deterministic generator per test."""
    return np.random.default_rng(20260819)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    """Well-conditioned random SPD matrix of unit-ish scale."""
    a = rng.standard_normal((n, n))
    cov = a @ a.T / n
    cov += 0.5 * np.eye(n)
    return cov
