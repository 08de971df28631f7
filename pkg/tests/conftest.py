import numpy as np
import pytest

from inhomssa.simulator.network import ReactionChannel, ReactionNetwork
from inhomssa.simulator.propensity import MassActionPropensity
from inhomssa.simulator.rates import SinusoidalRate


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale statistical checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale statistical check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def birth_network(rate=2.0):
    """One species, one constant birth channel."""
    return ReactionNetwork(("A",), (ReactionChannel((1,), MassActionPropensity(rate, {}), "birth"),), name="birth")


def birth_death_network(base=5.0, amplitude=2.0, period=4.0, decay=1.0):
    """Sinusoidal birth and linear decay of one species."""
    return ReactionNetwork(("A",), (
        ReactionChannel((1,), MassActionPropensity(SinusoidalRate(base, amplitude, period), {}), "birth"),
        ReactionChannel((-1,), MassActionPropensity(decay, {0: 1}), "decay"),
    ), name="birth-death")


@pytest.fixture
def birth():
    return birth_network()


@pytest.fixture
def birth_death():
    return birth_death_network()


@pytest.fixture
def rng():
    return np.random.default_rng(7)
