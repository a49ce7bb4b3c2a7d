import numpy as np
import pytest

from harmonic_learning import io
from harmonic_learning.harmonic import rng_from_seed


@pytest.fixture
def pennies():
    return io.bundled_game("matching_pennies")


@pytest.fixture
def siege():
    return io.bundled_game("siege")


@pytest.fixture
def rng():
    return rng_from_seed(2024)


def random_profile(rng, counts):
    return [rng.dirichlet(np.ones(k)) for k in counts]
