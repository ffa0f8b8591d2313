"""Shared fixtures. Expensive builds are session-scoped and reused."""

import numpy as np
import pytest

from manisob import (
    build_fermi_trivialization,
    build_geodesic_trivialization,
    function_family,
    make_manifold,
    make_pair,
)

PRESETS = ["euclidean", "flat-torus", "sphere2", "hyperbolic2",
           "surface-of-revolution"]


@pytest.fixture(scope="session")
def sphere_pair():
    return make_pair("sphere2")


@pytest.fixture(scope="session")
def torus_pair():
    return make_pair("flat-torus")


@pytest.fixture(scope="session")
def sphere():
    return make_manifold("sphere2")


@pytest.fixture(scope="session")
def torus():
    return make_manifold("flat-torus")


@pytest.fixture(scope="session")
def sphere_geo(sphere_pair):
    return build_geodesic_trivialization(sphere_pair[0], seed=0)


@pytest.fixture(scope="session")
def sphere_fermi(sphere_pair):
    return build_fermi_trivialization(*sphere_pair, seed=0)


@pytest.fixture(scope="session")
def torus_geo(torus_pair):
    return build_geodesic_trivialization(torus_pair[0], seed=0)


@pytest.fixture(scope="session")
def torus_fermi(torus_pair):
    return build_fermi_trivialization(*torus_pair, seed=0)


@pytest.fixture(scope="session")
def torus_family(torus_pair):
    return function_family(torus_pair[0], count=10, seed=17)


@pytest.fixture(scope="session")
def sphere_family(sphere_pair):
    return function_family(sphere_pair[0], count=10, seed=19)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
