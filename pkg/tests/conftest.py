import numpy as np
import pytest

from spikepool.sim import SynapseFilter, TimeBase, filter_spikes, periodic_trains

POC_PERIODS = (10, 8, 4, 6)


@pytest.fixture
def tb300():
    return TimeBase(300)


@pytest.fixture
def poc_currents(tb300):
    trains = periodic_trains(POC_PERIODS, tb300)
    return trains, filter_spikes(trains, SynapseFilter(0.005), tb300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
