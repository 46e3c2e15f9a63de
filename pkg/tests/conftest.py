import numpy as np
import pytest

from lamdis.environments import (
    load_fixture,
    parity_check,
    random_block_mdp,
    tk_equality,
    tmaze,
)
from lamdis.model import Policy


@pytest.fixture(scope="session")
def tmaze5():
    return tmaze(5, 0.9)


@pytest.fixture(scope="session")
def tmaze5_undiscounted():
    return tmaze(5, 1.0)


@pytest.fixture(scope="session")
def tiger():
    return load_fixture("tiger_modified")


@pytest.fixture(scope="session")
def parity():
    return parity_check()


@pytest.fixture(scope="session")
def tk():
    return tk_equality()


@pytest.fixture(scope="session")
def block6():
    return random_block_mdp(6, 3, seed=123)


def random_policy(p, rng):
    return Policy.from_logits(rng.normal(0.0, 0.5, (p.n_obs, p.n_actions)))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
