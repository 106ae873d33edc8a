import numpy as np
import pytest

import coalsim as cs


@pytest.fixture(scope="session")
def swap_model():
    """K=2 model whose only mutation swaps the type; pi = (1/2, 1/2)."""
    return cs.MutationModel.from_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)


@pytest.fixture(scope="session")
def swap_dist(swap_model):
    return cs.stationary(swap_model)


@pytest.fixture(scope="session")
def k1_model():
    return cs.MutationModel.from_matrix(np.array([[1.0]]), 2.0)


@pytest.fixture(scope="session")
def k1_dist(k1_model):
    return cs.stationary(k1_model)


def random_row_stochastic(rng: np.random.Generator, k: int) -> np.ndarray:
    P = rng.random((k, k)) + 0.05
    return P / P.sum(axis=1, keepdims=True)
