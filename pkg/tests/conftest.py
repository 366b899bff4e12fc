import pathlib

import numpy as np
import pytest

import safemdp as sm
from corpus import (
    feasible_p,
    random_initial,
    random_model,
    random_model_small,
    random_policy,
)

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def ex1_model():
    return sm.load_model((DATA / "ex1_model.json").read_text())


@pytest.fixture(scope="session")
def ex1_policy(ex1_model):
    return sm.load_policy((DATA / "ex1_policy.json").read_text(), ex1_model)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def solver_corpus():
    """25 feasible constrained instances; seed frozen with its margins."""
    rng = np.random.default_rng(7)
    out = []
    for _ in range(25):
        model = random_model(rng)
        out.append((model, feasible_p(rng, model)))
    return out


@pytest.fixture(scope="session")
def chain_corpus():
    """100 (model, policy, initial) triples on at most 6 states."""
    rng = np.random.default_rng(411)
    out = []
    for _ in range(100):
        model = random_model_small(rng)
        policy = random_policy(rng, model)
        initial = random_initial(rng, model)
        out.append((model, policy, initial))
    return out
