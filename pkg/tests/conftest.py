import numpy as np
import pytest

from affourier import systems
from affourier.ifs import make_system


@pytest.fixture
def cantor():
    return systems.cantor_product()


@pytest.fixture
def proximal():
    return systems.proximal_pair()


@pytest.fixture
def dirac():
    return systems.dirac()


@pytest.fixture
def lattice():
    return systems.lattice_control()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_system(rng, k=3, d=2, max_norm=0.8):
    """A validated system with random contractions and Dirichlet weights."""
    mats = []
    for _ in range(k):
        a = rng.normal(size=(d, d))
        a *= rng.uniform(0.2, max_norm) / np.linalg.norm(a, 2)
        mats.append(a)
    return make_system(mats, rng.normal(size=(k, d)), rng.dirichlet(np.ones(k) * 2))


@pytest.fixture
def random_systems(rng):
    return [random_system(rng, k, d) for k, d in [(2, 2), (3, 2), (3, 3), (4, 2)]]
