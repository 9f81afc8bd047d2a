import numpy as np
import pytest

from knapxbar import knapsack
from knapxbar.encoder import build_hamiltonian
from knapxbar.solver import ExactBackend


@pytest.fixture(scope="session")
def fixture_instance():
    return knapsack.load_instance(knapsack.bundled_instance_path())


@pytest.fixture(scope="session")
def fixture_hamiltonian(fixture_instance):
    return build_hamiltonian(fixture_instance)


@pytest.fixture(scope="session")
def fixture_backend(fixture_hamiltonian):
    return ExactBackend(fixture_hamiltonian)


def random_instance(rng: np.random.Generator, max_items=4, max_capacity=6):
    """Small random instance for property tests."""
    n = int(rng.integers(1, max_items + 1))
    weights = tuple(int(w) for w in rng.integers(1, 7, size=n))
    values = tuple(int(v) for v in rng.integers(1, 13, size=n))
    capacity = int(rng.integers(1, max_capacity + 1))
    return knapsack.KnapsackInstance(values, weights, capacity)


def random_fitting_instance(rng: np.random.Generator, max_items=4, max_capacity=6):
    """Like random_instance, but every item fits the knapsack on its own."""
    n = int(rng.integers(1, max_items + 1))
    capacity = int(rng.integers(1, max_capacity + 1))
    weights = tuple(int(w) for w in rng.integers(1, capacity + 1, size=n))
    values = tuple(int(v) for v in rng.integers(1, 13, size=n))
    return knapsack.KnapsackInstance(values, weights, capacity)
