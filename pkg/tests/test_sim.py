import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikepool.errors import InvalidStateError
from spikepool.sim import (
    IfNeuron,
    SynapseFilter,
    TimeBase,
    filter_spikes,
    make_periodic_train,
    periodic_trains,
    rate_model_if,
    steady_state_mean,
    step_if_neuron,
    tracking_error,
)


class TestTimeBase:
    def test_times(self):
        tb = TimeBase(4, 0.002)
        assert np.allclose(tb.t, [0, 0.002, 0.004, 0.006])

    @pytest.mark.parametrize("n, dt", [(0, 0.001), (5, 0.0), (5, -1.0), (2.5, 0.001)])
    def test_rejects_bad_values(self, n, dt):
        with pytest.raises(ValueError):
            TimeBase(n, dt)


class TestPeriodicTrain:
    def test_period_4(self):
        train = make_periodic_train(4, 1.0, 0, TimeBase(12))
        assert np.flatnonzero(train).tolist() == [0, 4, 8]

    def test_period_1_fires_every_step(self):
        assert np.array_equal(make_periodic_train(1, 1.0, 0, TimeBase(5)), np.ones(5))

    def test_long_period_single_spike(self):
        train = make_periodic_train(100, 1.0, 0, TimeBase(50))
        assert np.flatnonzero(train).tolist() == [0]

    def test_phase_and_amplitude(self):
        train = make_periodic_train(3, 0.5, 2, TimeBase(10))
        assert np.flatnonzero(train).tolist() == [2, 5, 8]
        assert set(train[train > 0]) == {0.5}

    def test_zero_period_rejected(self):
        with pytest.raises(ValueError):
            make_periodic_train(0, 1.0, 0, TimeBase(5))

    def test_stack(self):
        trains = periodic_trains([2, 3], TimeBase(6), phases=[1, 0])
        assert trains.shape == (6, 2)
        assert np.flatnonzero(trains[:, 0]).tolist() == [1, 3, 5]


class TestFilter:
    def test_saturated_train_converges_to_one(self):
        tb = TimeBase(200)
        u = filter_spikes(np.ones(200), SynapseFilter(0.005), tb)
        assert u[-1] == pytest.approx(1.0, abs=1e-9)

    def test_zero_train(self):
        tb = TimeBase(30)
        assert not filter_spikes(np.zeros(30), SynapseFilter(0.005), tb).any()

    def test_single_spike_closed_form(self):
        tb = TimeBase(40)
        train = np.zeros(40)
        train[0] = 1.0
        u = filter_spikes(train, SynapseFilter(0.005), tb)
        t = np.arange(40)
        expected = (1 - math.exp(-0.2)) * np.exp(-0.2 * t)
        assert np.allclose(u, expected, rtol=1e-12, atol=0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            filter_spikes(np.zeros(5), SynapseFilter(0.005), TimeBase(6))

    def test_bad_tau(self):
        with pytest.raises(ValueError):
            SynapseFilter(0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 10), st.floats(0.0005, 0.05))
    def test_steady_state_is_amplitude(self, a, tau):
        dt = 0.001
        # the residual after n steps is a * exp(-n dt / tau); exp(-20) is 2.1e-9,
        # so a 1e-9 band needs 21 time constants
        n = int(math.ceil(21 * tau / dt))
        u = filter_spikes(np.full(n, a), SynapseFilter(tau), TimeBase(n, dt))
        assert abs(u[-1] - a) <= 1e-9 * max(1.0, a)
        assert a - u[-1] == pytest.approx(a * math.exp(-n * dt / tau), rel=1e-5, abs=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        r = np.random.default_rng(seed)
        tb = TimeBase(60)
        x1, x2 = r.random(60) < 0.3, r.random(60) < 0.5
        f = SynapseFilter(0.005)
        lhs = filter_spikes(a * x1 + b * x2, f, tb)
        rhs = a * filter_spikes(x1, f, tb) + b * filter_spikes(x2, f, tb)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestIfNeuron:
    def test_zero_drive_never_spikes(self):
        n = IfNeuron()
        out = n.run(np.zeros(100), TimeBase(100))
        assert not out.any()

    def test_unit_input_spikes_every_step(self):
        tb = TimeBase(20)
        n = IfNeuron(gain=1000.0)
        assert all(step_if_neuron(n, 1.0, tb) == 1.0 for _ in range(20))

    def test_quarter_drive_rate(self):
        tb = TimeBase(1000)
        out = IfNeuron(gain=1000.0).run(np.full(1000, 0.25), tb)
        assert 0.24 <= out.sum() / 1000 <= 0.26

    def test_overdrive_saturates(self):
        tb = TimeBase(10)
        n = IfNeuron(gain=1000.0)
        assert n.run(np.full(10, 7.0), tb).sum() == 10
        # the excess charge does not linger
        assert n.voltage < 1.0

    def test_non_finite_input(self):
        with pytest.raises(InvalidStateError):
            step_if_neuron(IfNeuron(), float("nan"), TimeBase(1))

    def test_amplitude(self):
        out = IfNeuron(amplitude=0.3).run(np.ones(3), TimeBase(3))
        assert out.tolist() == [0.3, 0.3, 0.3]

    def test_step_matches_run(self):
        tb = TimeBase(50)
        x = np.random.default_rng(3).uniform(0, 0.8, 50)
        a, b = IfNeuron(), IfNeuron()
        stepped = [step_if_neuron(a, xi, tb) for xi in x]
        assert np.array_equal(stepped, b.run(x, tb))
        assert a.voltage == b.voltage

    def test_max_rate_clips(self):
        tb = TimeBase(1000)
        out = IfNeuron(max_rate=0.5).run(np.full(1000, 1.0), tb)
        assert out.sum() == 500

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-0.5, 2.0), st.integers(1, 400), st.floats(0, 0.3))
    def test_quantization_bound(self, x, n, bias):
        tb = TimeBase(n)
        neuron = IfNeuron(gain=1000.0, bias=bias)
        count = neuron.run(np.full(n, x), tb).sum()
        expected = rate_model_if(x, IfNeuron(gain=1000.0, bias=bias), tb) * n
        assert abs(count - expected) <= 1 + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-2, 5), min_size=1, max_size=80))
    def test_at_most_one_spike_per_step(self, xs):
        out = IfNeuron(amplitude=1.0).run(np.array(xs), TimeBase(len(xs)))
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_determinism(self):
        x = np.random.default_rng(5).uniform(0, 1, 200)
        tb = TimeBase(200)
        assert np.array_equal(IfNeuron().run(x, tb), IfNeuron().run(x, tb))


class TestRateModel:
    @pytest.mark.parametrize("x, expected", [(-0.1, 0.0), (0.0, 0.0), (0.5, 0.5), (3.0, 1.0)])
    def test_values(self, x, expected):
        assert rate_model_if(x, IfNeuron(gain=1000.0), TimeBase(1)) == pytest.approx(expected)


def test_steady_state_mean_uses_last_half():
    assert steady_state_mean(np.array([0.0, 0.0, 1.0, 3.0])) == 2.0


def test_tracking_error_zero_for_identical():
    x = np.linspace(0, 1, 100)
    assert tracking_error(x, x) == 0.0
