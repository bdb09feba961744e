import numpy as np
import pytest
from hypothesis import settings

from mvi import generators
from mvi.mdp import Mdp, Policy, validate

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def random_policy(mdp, rng, randomized=False):
    counts = mdp.action_counts
    if not randomized:
        return Policy.deterministic([rng.integers(c) for c in counts])
    rows = []
    for c in counts:
        w = rng.random(c) + 1e-3
        w = w / w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        rows.append(w)
    return Policy.randomized(rows)


def absorbing(reward=0.5):
    return validate(Mdp.from_actions([[([1.0], reward)]]))


def two_cycle():
    return validate(Mdp.from_actions([[([0.0, 1.0], 1.0)], [([1.0, 0.0], 0.0)]]))


def leaky(T):
    """State 0 loops with prob 1 - 1/T and otherwise falls into absorbing state 1."""
    return validate(Mdp.from_actions([[([1 - 1 / T, 1 / T], 0.0)], [([0.0, 1.0], 0.0)]]))


@pytest.fixture
def four():
    return generators.gen_four_state(0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
