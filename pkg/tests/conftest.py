import random

import pytest

from app.services.automorphism import Automorphism
from app.services.upg_graph import load_fixture


@pytest.fixture
def twist():
    """x_1 ↦ x_1 x_2."""
    return Automorphism.parse(["ab", "b"])


@pytest.fixture
def fibonacci():
    return Automorphism.parse(["b", "ab"])


@pytest.fixture
def swap():
    return Automorphism.parse(["b", "a"])


@pytest.fixture
def rng():
    return random.Random(7)


@pytest.fixture
def dehn_map():
    return load_fixture("dehn_twist")


@pytest.fixture
def three_stratum_map():
    return load_fixture("three_stratum")
