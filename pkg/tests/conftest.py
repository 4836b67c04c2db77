"""Shared fixtures: fleet specs, a constructed conjugate pair, orbit DBs.

Everything expensive is session-scoped so the whole suite pays for it
once; tests must not mutate these objects.
"""

import numpy as np
import pytest
from importlib import resources

import anosovlab as al
from anosovlab.maps import ConjugatedMap, TrigDiffeo

PHI_AMP = 0.1 / (2.0 * np.pi)


def fleet_path(name):
    return str(resources.files("anosovlab").joinpath(f"fleet/{name}.json"))


@pytest.fixture(scope="session")
def linear():
    return al.load_spec(fleet_path("a3_linear"))


@pytest.fixture(scope="session")
def gen1():
    return al.load_spec(fleet_path("a3_gen1"))


@pytest.fixture(scope="session")
def special():
    return al.load_spec(fleet_path("a3_special"))


@pytest.fixture(scope="session")
def detuned():
    return al.load_spec(fleet_path("a3_detuned"))


@pytest.fixture(scope="session")
def phi():
    # lift Phi = Id + PHI_AMP * sin(2 pi x2) e1
    return TrigDiffeo([((0, 1), (PHI_AMP, 0.0), 0.0)])


@pytest.fixture(scope="session")
def g_conj(gen1, phi):
    return ConjugatedMap("a3_gen1_conj", gen1, phi)


@pytest.fixture(scope="session")
def h_conj(gen1, g_conj):
    return al.conjugacy_between(gen1, g_conj)


@pytest.fixture(scope="session")
def db_gen1(gen1):
    db = al.OrbitDatabase(gen1)
    for n in range(1, 6):
        db.ensure(n)
    return db


@pytest.fixture(scope="session")
def db_linear(linear):
    db = al.OrbitDatabase(linear)
    for n in range(1, 6):
        db.ensure(n)
    return db


@pytest.fixture(scope="session")
def field_gen1(gen1):
    return al.conjugacy_to_linear(gen1)


@pytest.fixture(scope="session")
def field_linear(linear):
    return al.conjugacy_to_linear(linear)
