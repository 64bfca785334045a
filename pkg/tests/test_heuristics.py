import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikepool.errors import EmptyDistributionError
from spikepool.heuristics import (
    IsiDistribution,
    SweepConfig,
    collect_isi,
    evaluate_sweep,
    exact_max_oracle,
    fat_tailed,
    group_trains,
    light_tailed,
    load_isi_file,
    pearson,
    regression_slope,
    resolve_distribution,
    sample_groups,
    true_max_oracle,
    uniform,
)
from spikepool.pooling import PoolMethod
from spikepool.sim import SynapseFilter, TimeBase, filter_spikes, make_periodic_train, periodic_trains
from spikepool.sim import steady_state_mean

F = SynapseFilter(0.005)


class TestDistribution:
    def test_normalised_and_sorted(self):
        d = IsiDistribution([4, 2], [1.0, 3.0])
        assert d.isis.tolist() == [2, 4]
        assert np.allclose(d.probs, [0.75, 0.25])
        assert d.mean == pytest.approx(2.5)

    @pytest.mark.parametrize("isis, probs", [([0], [1.0]), ([2], [-1.0]), ([1, 2], [1.0])])
    def test_invalid(self, isis, probs):
        with pytest.raises(ValueError):
            IsiDistribution(isis, probs)

    def test_empty(self):
        with pytest.raises(EmptyDistributionError):
            IsiDistribution([], [])
        with pytest.raises(EmptyDistributionError):
            IsiDistribution([3], [0.0])

    def test_light_tailed_mostly_short(self):
        d = light_tailed()
        short = d.probs[(d.isis >= 2) & (d.isis <= 6)].sum()
        assert short > 0.6

    def test_fat_tailed_heavier(self):
        assert fat_tailed().probs[fat_tailed().isis > 20].sum() > light_tailed().probs[light_tailed().isis > 20].sum()

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "isi.csv"
        path.write_text("isi,mass\n2,0.5\n3,0.25\n# note\n5,0.25\n")
        d = load_isi_file(path)
        assert d.isis.tolist() == [2, 3, 5]
        assert resolve_distribution(str(path)).mass(3) == 0.25

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("isi,mass\n")
        with pytest.raises(EmptyDistributionError):
            load_isi_file(path)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,0.5\nx,y\n")
        with pytest.raises(ValueError):
            load_isi_file(path)

    def test_presets(self):
        assert resolve_distribution("light").isis.max() == 40
        assert resolve_distribution("fat").isis.max() == 200


class TestCollect:
    def test_point_mass(self):
        d = collect_isi([make_periodic_train(5, 1, 0, TimeBase(50))])
        assert d.isis.tolist() == [5] and d.probs.tolist() == [1.0]

    def test_gap_counts(self):
        tb = TimeBase(41)
        trains = periodic_trains([2, 4], tb)
        d = collect_isi(trains)
        # 20 gaps of 2 and 10 gaps of 4
        assert d.isis.tolist() == [2, 4]
        assert np.allclose(d.probs, [2 / 3, 1 / 3])

    def test_silent_train_ignored(self):
        tb = TimeBase(30)
        d = collect_isi([make_periodic_train(3, 1, 0, tb), np.zeros(30)])
        assert d.isis.tolist() == [3]

    def test_no_gaps(self):
        with pytest.raises(EmptyDistributionError):
            collect_isi([np.zeros(10), make_periodic_train(100, 1, 0, TimeBase(10))])


class TestSampling:
    def test_point_mass(self):
        groups = sample_groups(IsiDistribution([5], [1.0]), SweepConfig(n_groups=10))
        assert (groups == 5).all() and groups.shape == (10, 4)

    def test_seeded(self):
        cfg = SweepConfig(seed=9)
        assert np.array_equal(sample_groups(light_tailed(), cfg), sample_groups(light_tailed(), cfg))

    def test_uniform_mean(self):
        cfg = SweepConfig(n_groups=2500, group_size=4, seed=1)
        x = sample_groups(uniform(2, 10), cfg).ravel()
        sigma = np.sqrt(((np.arange(2, 11) - 6.0) ** 2).mean() / x.size)
        assert abs(x.mean() - 6.0) <= 3 * sigma

    def test_group_trains(self):
        trains = group_trains(np.array([[2, 3]]), np.array([[1, 0]]), TimeBase(7))
        assert np.flatnonzero(trains[:, 0, 0]).tolist() == [1, 3, 5]
        assert np.flatnonzero(trains[:, 0, 1]).tolist() == [0, 3, 6]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SweepConfig(n_groups=0)
        with pytest.raises(ValueError):
            SweepConfig(group_size=0)


@pytest.fixture(scope="module")
def mjop():
    return evaluate_sweep(SweepConfig(), PoolMethod.MJOP)


@pytest.fixture(scope="module")
def avam():
    return evaluate_sweep(SweepConfig(), PoolMethod.AVAM)


class TestSweep:
    def test_mjop_grid(self, mjop):
        assert mjop.grid.tolist() == [1.0, 2.0, 5.0]
        assert mjop.estimates.shape == (3, 256)
        assert mjop.correlations[mjop.best()] >= 0.95

    def test_mjop_correlation_scale_invariant(self, mjop):
        assert np.allclose(mjop.correlations, mjop.correlations[0], atol=1e-9)
        assert np.allclose(mjop.slopes / mjop.grid, mjop.slopes[0], rtol=1e-9)
        assert np.allclose(mjop.estimates[2], 5 * mjop.estimates[0], rtol=1e-12)

    def test_avam_small_radii(self, avam):
        for r, c in zip(avam.grid, avam.correlations):
            if r <= 0.30:
                assert c >= 0.95

    def test_avg_below_true_max(self, mjop):
        assert np.all(mjop.avg_trace <= mjop.true_max_trace + 1e-15)

    def test_estimates_above_avg_at_steady_state(self, mjop, avam):
        assert np.all(avam.estimates >= avam.avg[None, :] - 1e-12)
        assert np.all(mjop.estimates[1:] >= mjop.avg[None, :])

    def test_correlations_in_range(self, mjop, avam):
        for res in (mjop, avam):
            assert np.all(np.abs(res.correlations) <= 1.0)

    def test_deterministic(self, avam):
        again = evaluate_sweep(SweepConfig(), PoolMethod.AVAM)
        assert np.array_equal(again.estimates, avam.estimates)

    def test_single_group_undefined(self):
        res = evaluate_sweep(SweepConfig(n_groups=1), PoolMethod.AVAM)
        assert not res.correlation_defined.any()
        assert res.best() == -1

    @pytest.mark.parametrize("method, grid", [(PoolMethod.MJOP, (1.0,)), (PoolMethod.AVAM, (0.25,))])
    @pytest.mark.parametrize("isi, aligned", [(1, False), (3, True)])
    def test_degenerate_distribution(self, method, grid, isi, aligned):
        cfg = SweepConfig(dist=IsiDistribution([isi], [1.0]), grid=grid, n_groups=16, align_phases=aligned)
        res = evaluate_sweep(cfg, method)
        assert np.allclose(res.true_max, res.avg, rtol=1e-12)
        assert np.allclose(res.estimates[0], res.true_max, rtol=0.05)
        assert np.isnan(res.correlations).all()

    def test_fat_tailed_runs(self):
        res = evaluate_sweep(SweepConfig(dist=fat_tailed(), n_groups=32), PoolMethod.AVAM)
        assert res.estimates.shape == (4, 32)

    def test_rejects_other_methods(self):
        with pytest.raises(ValueError):
            evaluate_sweep(SweepConfig(n_groups=2), PoolMethod.AVERAGE)


class TestStats:
    def test_pearson(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert np.isnan(pearson([1, 1, 1], [1, 2, 3]))
        assert np.isnan(pearson([1], [2]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_pearson_matches_numpy(self, seed):
        r = np.random.default_rng(seed)
        x, y = r.normal(size=20), r.normal(size=20)
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)

    def test_slope(self):
        assert regression_slope([0, 1, 2], [1, 3, 5]) == pytest.approx(2.0)
        assert np.isnan(regression_slope([2, 2], [1, 3]))


class TestOracles:
    def test_true_max_single(self):
        x = np.array([0.1, 0.3])
        assert np.array_equal(true_max_oracle([x]), x)

    def test_true_max_pair(self):
        assert true_max_oracle([[0.2, 0.5], [0.4, 0.1]]).tolist() == [0.4, 0.5]

    def test_true_max_brute_force(self, rng):
        traces = list(rng.random((5, 40)))
        expected = [max(tr[t] for tr in traces) for t in range(40)]
        assert true_max_oracle(traces).tolist() == expected

    def test_true_max_errors(self):
        with pytest.raises(ValueError):
            true_max_oracle([])
        with pytest.raises(ValueError):
            true_max_oracle([[1.0], [1.0, 2.0]])

    def test_exact_max_poc(self, tb300):
        trains = list(periodic_trains((10, 8, 4, 6), tb300).T)
        expected = filter_spikes(make_periodic_train(4, 1, 0, tb300), F, tb300)
        assert np.array_equal(exact_max_oracle(trains, F, tb300), expected)

    def test_exact_max_silent(self, tb300):
        assert not exact_max_oracle([np.zeros(300)] * 3, F, tb300).any()

    def test_exact_max_errors(self, tb300):
        with pytest.raises(ValueError):
            exact_max_oracle([], F, tb300)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_true_above_exact_at_steady_state(self, seed):
        r = np.random.default_rng(seed)
        tb = TimeBase(300)
        periods = r.integers(1, 15, 4)
        trains = list(periodic_trains(periods, tb, r.integers(0, periods)).T)
        true = true_max_oracle([filter_spikes(t, F, tb) for t in trains])
        exact = exact_max_oracle(trains, F, tb)
        assert steady_state_mean(true) >= steady_state_mean(exact) - 1e-9
