import io
import time

import numpy as np
import pytest

from roughvol.errors import EventBudgetError, InstabilityError, ParameterError, TooFewBinsError
from roughvol.microsim import (
    EventStream,
    ExponentialKernel,
    HawkesParams,
    PowerLawKernel,
    ZeroKernel,
    bin_counts,
    coarse_grain_to_vol,
    hawkes_simulate,
    hawkes_simulate_cluster,
    integrated_hurst,
    log_count_hurst,
    poisson_null_band,
)


def test_poisson_mean_and_variance():
    p = HawkesParams(10.0, ZeroKernel(), 100.0, seed=1)
    n = np.array([len(hawkes_simulate(p, i)) for i in range(400)])
    assert abs(n.mean() - 1000) < 4 * np.sqrt(1000 / 400)
    # sample variance of a Poisson(1000) count: sd about 1000 * sqrt(2 / 399)
    assert abs(n.var(ddof=1) - 1000) < 4 * 1000 * np.sqrt(2 / 399)


def test_poisson_times_uniform():
    s = hawkes_simulate(HawkesParams(50.0, ZeroKernel(), 100.0, seed=2))
    from scipy import stats
    assert stats.kstest(s.jump_times / 100.0, "uniform").pvalue > 1e-3


def test_exponential_stationary_rate():
    k = ExponentialKernel(0.5, 1.0)
    p = HawkesParams(1.0, k, 500.0, seed=3)
    rates = np.array([len(hawkes_simulate(p, i)) / p.horizon for i in range(200)])
    se = rates.std(ddof=1) / np.sqrt(len(rates))
    assert abs(rates.mean() - p.stationary_rate()) < 3 * se


def test_thinning_matches_branching():
    k = PowerLawKernel.with_norm(0.5, 1.6, t0=0.01)
    p = HawkesParams(20.0, k, 50.0, seed=4)
    a = np.array([len(hawkes_simulate(p, i)) for i in range(150)])
    b = np.array([len(hawkes_simulate_cluster(p, i)) for i in range(150)])
    se = np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    assert abs(a.mean() - b.mean()) < 4 * se


def test_deterministic_per_seed():
    p = HawkesParams(30.0, PowerLawKernel.with_norm(0.8, 1.6), 20.0, seed=5)
    x, y = hawkes_simulate(p, 2), hawkes_simulate(p, 2)
    np.testing.assert_array_equal(x.jump_times, y.jump_times)
    assert not np.array_equal(hawkes_simulate(p, 3).jump_times[:10], x.jump_times[:10])


def test_buffer_growth_is_seamless():
    # a tiny initial guess forces several reallocations
    p = HawkesParams(1.0, ExponentialKernel(0.9, 1.0), 2000.0, seed=6)
    s = hawkes_simulate(p)
    assert len(s) > 4000
    assert np.all(np.diff(s.jump_times) > 0)
    assert s.jump_times[-1] <= p.horizon


def test_instability_rejected():
    with pytest.raises(InstabilityError) as exc:
        HawkesParams(1.0, PowerLawKernel.with_norm(1.0, 1.6), 10.0)
    assert exc.value.exit_status == 2
    with pytest.raises(InstabilityError):
        HawkesParams(1.0, ExponentialKernel(2.0, 1.0), 10.0)
    with pytest.raises(ParameterError):
        PowerLawKernel(1.0, 0.9)
    with pytest.raises(ParameterError):
        HawkesParams(0.0, ZeroKernel(), 10.0)


def test_event_budget_guard():
    p = HawkesParams(100.0, ZeroKernel(), 100.0, max_events=500)
    with pytest.raises(EventBudgetError):
        hawkes_simulate(p)
    with pytest.raises(EventBudgetError):
        hawkes_simulate_cluster(p)


def test_power_law_norm_and_expansion():
    k = PowerLawKernel.with_norm(0.98, 1.6)
    assert k.l1_norm() == pytest.approx(0.98, rel=1e-14)
    assert k.expansion_error(50.0) < 1e-6
    c, s = k.exponentials(50.0)
    assert np.sum(c / s) == pytest.approx(0.98, rel=1e-4)


def test_clustering_superlinear_variance():
    s = hawkes_simulate(HawkesParams(50.0, PowerLawKernel.with_norm(0.95, 1.6), 400.0, seed=1))
    widths = np.array([0.05, 0.1, 0.2, 0.4, 0.8, 1.6])
    v = [bin_counts(s, w).var() for w in widths]
    assert np.polyfit(np.log(widths), np.log(v), 1)[0] > 1.2
    pois = hawkes_simulate(HawkesParams(50.0, ZeroKernel(), 400.0, seed=1))
    v = [bin_counts(pois, w).var() for w in widths]
    assert np.polyfit(np.log(widths), np.log(v), 1)[0] == pytest.approx(1.0, abs=0.1)


def test_throughput():
    p = HawkesParams(100.0, PowerLawKernel.with_norm(0.98, 1.6), 220.0, seed=7)
    hawkes_simulate(HawkesParams(1.0, PowerLawKernel.with_norm(0.5, 1.6), 1.0))
    t = time.perf_counter()
    s = hawkes_simulate(p)
    elapsed = time.perf_counter() - t
    assert len(s) >= 1_000_000 or elapsed < 60 * len(s) / 1_000_000
    assert elapsed < 60


def test_coarse_grain():
    s = EventStream(np.array([0.05, 0.15, 0.16, 0.95]), meta={"horizon": 10.0})
    vol = coarse_grain_to_vol(s, 0.1)
    assert len(vol) == 100
    assert vol.values[0] == 1.0 and vol.values[1] == 2.0 and vol.values[2] == 0.5
    assert vol.meta["floored_bins"] == 97
    assert vol.units == "var"


def test_too_few_bins():
    s = EventStream(np.array([0.5]), meta={"horizon": 1.0})
    with pytest.raises(TooFewBinsError):
        coarse_grain_to_vol(s, 1.0)
    with pytest.raises(ParameterError):
        bin_counts(s, 0.0)


def test_poisson_integrated_h_in_null_band():
    lo, hi = poisson_null_band(50.0, 100.0, 0.05, n_runs=30, seed=1)
    assert lo < 0.5 < hi
    p = HawkesParams(50.0, ZeroKernel(), 100.0, seed=99)
    h = integrated_hurst(hawkes_simulate(p), 0.05)
    assert lo - 0.03 < h < hi + 0.03


def test_near_critical_log_counts_rough():
    p = HawkesParams(100.0, PowerLawKernel.with_norm(0.98, 1.6), 50.0, seed=8)
    h = log_count_hurst(hawkes_simulate(p), 0.025)
    assert h < 0.4


def test_stream_csv_round_trip():
    s = hawkes_simulate(HawkesParams(5.0, ZeroKernel(), 10.0, seed=9))
    buf = io.StringIO()
    s.to_csv(buf)
    back = EventStream.from_csv(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back.jump_times, s.jump_times)
    with pytest.raises(ParameterError):
        EventStream.from_csv(io.StringIO("t\n1.0\n"))
    with pytest.raises(ParameterError):
        EventStream(np.array([1.0, 1.0]))
