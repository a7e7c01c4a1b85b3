"""Shared fixtures: small synthetic corpora and models trained once per session."""

import numpy as np
import pytest

from notefield import evaluator, fixtures, trainer
from notefield.model import Model, Topology


@pytest.fixture(scope="session")
def chorale24():
    return fixtures.chorale_corpus(seed=101, n_pieces=24, length=48)


@pytest.fixture(scope="session")
def heldout_corpus():
    return fixtures.chorale_corpus(seed=202, n_pieces=12, length=48)


@pytest.fixture(scope="session")
def topo42(chorale24):
    return Topology(n=4, K=4, L=2, alphabets=chorale24.alphabets)


@pytest.fixture(scope="session")
def full_model(chorale24, topo42):
    return trainer.fit(chorale24, topo42, trainer.TrainingConfig(lam=3e-5))


@pytest.fixture(scope="session")
def vertical_model(chorale24):
    return evaluator.baseline_models(chorale24, "vertical_only")


@pytest.fixture(scope="session")
def independent_model(chorale24):
    return evaluator.baseline_models(chorale24, "independent")


@pytest.fixture(scope="session")
def rhythm8():
    return fixtures.rhythm_corpus(seed=77, n_pieces=20, bars=8)


@pytest.fixture(scope="session")
def rhythm_model(rhythm8):
    topo = Topology(n=4, K=1, L=1, alphabets=rhythm8.alphabets, rhythm=8)
    return trainer.fit(rhythm8, topo, trainer.TrainingConfig(lam=1e-4))


def make_tiny_model(seed=0, n=2, l_alpha=3, K=1, theta_scale=1.0):
    """Random desk-scale model: alphabets {60,62,64}-style, every family key drawn."""
    rng = np.random.default_rng(seed)
    alphabets = [[60 + 2 * a for a in range(l_alpha)] for _ in range(n)]
    topo = Topology(n=n, K=K, L=K, alphabets=alphabets)
    from notefield.model import enumerate_family

    params = {}
    for key in enumerate_family(topo):
        params[key] = float(rng.uniform(-theta_scale, theta_scale))
    return Model(topology=topo, params=params)


@pytest.fixture
def tiny_model():
    return make_tiny_model(seed=0)
