import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughvol.errors import DegenerateRegressionError, NonPositiveValueError, ParameterError, SeriesTooShortError
from roughvol.fracproc import FbmParams, fbm_batch
from roughvol.scaling import (
    ScalingReport,
    fit_from_m,
    fit_scaling,
    increment_moments,
    m_q_delta,
    split_reestimate,
    structure_function,
)
from roughvol.series import VolSeries

# Monte Carlo over 100 fBM paths (H=0.14, N=3500): sd of the q=2 slope
ZETA2_SD = 0.022
# sd of the difference of half-sample H estimates on the same ensemble
SPLIT_DIFF_SD = 0.0186


@pytest.fixture(scope="module")
def fbm_014():
    return fbm_batch(FbmParams(0.14, 3500, seed=11), 100)


def logvol(x):
    return VolSeries.from_values(np.exp(np.asarray(x)), units="vol")


def test_constant_series_gives_zero():
    s = VolSeries.from_values(np.full(50, 0.2), units="vol")
    for q in (0.5, 2.0, 3.0):
        for d in (1, 7):
            assert m_q_delta(s, q, d) == 0.0


def test_alternating_series():
    x = np.array([0.0, 1.0] * 5)
    assert m_q_delta(logvol(x), 2.0, 1) == pytest.approx(1.0, abs=1e-15)


def test_constant_series_fit_is_degenerate():
    s = VolSeries.from_values(np.full(50, 0.2), units="vol")
    with pytest.raises(DegenerateRegressionError):
        fit_scaling(s, delta_grid=range(1, 10))


def test_validation():
    s = logvol(np.zeros(5))
    with pytest.raises(SeriesTooShortError):
        m_q_delta(s, 2.0, 5)
    with pytest.raises(ParameterError):
        m_q_delta(s, 0.0, 1)
    with pytest.raises(ParameterError):
        m_q_delta(s, 2.0, 1.5)
    with pytest.raises(NonPositiveValueError):
        VolSeries.from_values([0.1, 0.0, 0.2], units="var")


def test_offset_average_by_hand():
    x = np.array([0.0, 0.3, -0.2, 0.5, 0.1, 0.4, 0.9])
    got = m_q_delta(logvol(x), 1.0, 2)
    inc = np.abs(x[2:] - x[:-2])
    by_offset = [inc[0::2].mean(), inc[1::2].mean()]
    assert got == pytest.approx(np.mean(by_offset), rel=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=12, max_size=60), st.integers(1, 5))
def test_reversal_invariance_q2(values, delta):
    x = np.asarray(values)
    fwd = structure_function(x, [2.0], [delta])[0, 0]
    rev = structure_function(x[::-1], [2.0], [delta])[0, 0]
    assert rev == pytest.approx(fwd, rel=1e-12, abs=1e-300)


def test_exact_power_law():
    q = np.array([0.5, 1.0, 1.5, 2.0, 3.0])
    d = np.arange(1, 31)
    m = d[None, :] ** (0.5 * q[:, None])
    rep = fit_from_m(m, q, d)
    np.testing.assert_allclose(rep.zeta, 0.5 * q, rtol=1e-12)
    assert rep.hurst_hat == pytest.approx(0.5, rel=1e-12)
    assert np.max(np.abs(rep.residuals)) < 1e-12
    assert rep.nu_hat == pytest.approx(1.0, rel=1e-12)


def test_nu_hat_from_q2_intercept():
    d = np.arange(1, 31)
    q = np.array([1.0, 2.0])
    m = np.vstack([0.3 * np.sqrt(2 / np.pi) * d**0.14, 0.09 * d**0.28])
    assert fit_from_m(m, q, d).nu_hat == pytest.approx(0.3, rel=1e-12)


def test_zeta2_on_fbm(fbm_014):
    z = np.array([fit_scaling(x, [2.0]).zeta[0] for x in fbm_014])
    assert abs(z.mean() - 0.28) < 0.03
    assert np.all(np.abs(z - 0.28) < 4 * ZETA2_SD)


def test_nu_recovered_on_fbm(fbm_014):
    # unit-variance fBM increments: nu = 1
    nu = np.array([fit_scaling(x).nu_hat for x in fbm_014[:20]])
    assert abs(nu.mean() - 1.0) < 0.05


def test_monotone_in_delta_on_ensemble(fbm_014):
    m = np.mean([structure_function(x, [1.0, 2.0], range(1, 31)) for x in fbm_014[:30]], axis=0)
    assert np.all(np.diff(m, axis=1) > 0)


def test_white_noise_increment_moments():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(20000)
    mom = increment_moments(logvol(x), 1, hurst=0.0)
    n = mom.n
    assert abs(mom.skewness) < 4 * np.sqrt(6 / n)
    assert abs(mom.excess_kurtosis) < 4 * np.sqrt(24 / n)
    assert mom.hist_counts.sum() == n
    assert len(mom.hist_edges) == 51


def test_increment_std_self_similar(fbm_014):
    # Monte Carlo: mean ratio 1.569, per-path sd 0.044 at N=3500
    ratios = np.array([increment_moments(x, 25, hurst=0.14).std / np.diff(x).std(ddof=1) for x in fbm_014])
    assert abs(ratios.mean() - 25**0.14) < 4 * 0.044 / np.sqrt(len(ratios))


def test_overlay_scaling():
    x = fbm_batch(FbmParams(0.14, 3500, seed=2), 1)[0]
    mom = increment_moments(x, 25, hurst=0.14)
    assert mom.overlay_std == pytest.approx(np.diff(x).std(ddof=1) * 25**0.14, rel=1e-12)
    auto = increment_moments(x, 25)
    assert auto.overlay_std > 0


def test_increment_moments_too_short():
    with pytest.raises(SeriesTooShortError):
        increment_moments(logvol(np.zeros(3)), 3)


def test_split_one_segment_identical():
    x = fbm_batch(FbmParams(0.3, 500, seed=4), 1)[0]
    (one,) = split_reestimate(x, 1)
    full = fit_scaling(x)
    np.testing.assert_array_equal(one.m_values, full.m_values)
    assert one.hurst_hat == full.hurst_hat


def test_split_halves_agree(fbm_014):
    inside = []
    for x in fbm_014[:20]:
        a, b = split_reestimate(x, 2)
        inside.append(abs(a.hurst_hat - b.hurst_hat) < 1.96 * SPLIT_DIFF_SD)
    assert np.mean(inside) >= 0.8


def test_split_too_short():
    with pytest.raises(SeriesTooShortError):
        split_reestimate(np.zeros(100), 4)
    with pytest.raises(ParameterError):
        split_reestimate(np.zeros(100), 0)


def test_report_serialization():
    x = fbm_batch(FbmParams(0.3, 400, seed=5), 1)[0]
    rep = fit_scaling(logvol(x))
    back = ScalingReport.from_dict(json.loads(rep.to_json()))
    np.testing.assert_array_equal(back.m_values, rep.m_values)
    np.testing.assert_array_equal(back.zeta, rep.zeta)
    assert back.hurst_hat == rep.hurst_hat
    rows = rep.to_csv().strip().split("\n")
    assert rows[0] == "q,delta,log_delta,m,log_m,fitted_m"
    assert len(rows) == 1 + 5 * 30
    q, d, _, m, _, _ = rows[1].split(",")
    assert float(m) == rep.m_values[0, 0] and q == "0.5" and d == "1"


def test_gaps_use_index_lags():
    dates = np.array(["2020-01-01", "2020-01-02", "2020-01-06", "2020-01-07"], dtype="datetime64[D]")
    s = VolSeries(dates, np.exp([0.0, 1.0, 0.0, 1.0]), "vol", "gappy")
    assert s.n_gaps > 0
    assert m_q_delta(s, 2.0, 1) == pytest.approx(1.0)
