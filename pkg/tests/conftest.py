import numpy as np
import pytest

import planargibbs as pg


@pytest.fixture(scope="session")
def wr_model():
    return pg.widom_rowlinson()


@pytest.fixture(scope="session")
def wr_dec(wr_model):
    return wr_model.decompose()


@pytest.fixture(scope="session")
def step_model():
    return pg.step_potts()


@pytest.fixture(scope="session")
def step_dec(step_model):
    return step_model.decompose()


@pytest.fixture(scope="session")
def zero_model():
    return pg.zero_potential()


def random_configuration(rng, n, window_r=18.0, nspins=2, contacts=0):
    """Random marked points, optionally with extra near-contact partners to
    exercise hard-core rigidity (not a Gibbs sample)."""
    xy = rng.uniform(-window_r * 0.95, window_r * 0.95, size=(n, 2))
    sp = rng.integers(0, nspins, size=n)
    for k in range(min(contacts, n // 2)):
        xy[n - 1 - k] = xy[k] + rng.uniform(-0.6, 0.6, size=2)
    return pg.Configuration(pg.Window(window_r), xy, sp, validate=False)


def random_bonds(rng, n, n_edges=3):
    edges = []
    for a, b in rng.integers(0, n, size=(n_edges, 2)):
        if a != b:
            edges.append((int(a), int(b)))
    return pg.BondSet(edges, n)
