import os

os.environ.setdefault("LOG_TO_FILE", "false")

import numpy as np
import pytest

from app.decomp.oracle import solve_recursively_optimal
from app.envs.registry import make_environment
from app.mdp.model import Outcome, TabularModel
from app.mdp.state import StateSpace, StateVariable


def chain_model(length: int = 4, gamma: float = 1.0, slip: float = 0.0) -> TabularModel:
    """
    Corridor of `length` cells; action 0 moves right (slipping back with
    probability `slip`), action 1 stays. The last cell is terminal.
    """
    space = StateSpace([StateVariable("x", length)])
    goal = length - 1
    outcomes = []
    for s in range(length):
        if s == goal:
            outcomes.append([(Outcome(s, 1.0, 0.0),), (Outcome(s, 1.0, 0.0),)])
            continue
        right = [Outcome(s + 1, 1.0 - slip, -1.0)]
        if slip > 0:
            right.append(Outcome(max(s - 1, 0), slip, -1.0))
        outcomes.append([tuple(right), (Outcome(s, 1.0, -1.0),)])
    start = np.zeros(length)
    start[0] = 1.0
    return TabularModel("chain", space, ["Right", "Stay"], outcomes, start, [goal], gamma=gamma)


@pytest.fixture
def chain():
    return chain_model()


@pytest.fixture(scope="session")
def taxi():
    return make_environment("taxi")


@pytest.fixture(scope="session")
def fickle_taxi():
    return make_environment("taxi-fickle")


@pytest.fixture(scope="session")
def fuel_taxi():
    return make_environment("taxi-fuel")


@pytest.fixture(scope="session")
def two_rooms():
    return make_environment("two-rooms")


@pytest.fixture(scope="session")
def two_rooms_shaped():
    return make_environment("two-rooms", {"exit_pseudo_rewards": [-2.0, -6.0]})


@pytest.fixture(scope="session")
def taxi_store(taxi):
    return solve_recursively_optimal(taxi.graph, taxi.model)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
