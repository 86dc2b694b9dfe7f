import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughvol.errors import DegenerateRegressionError, ParameterError, SeriesTooShortError, TooFewBlocksError
from roughvol.fracproc import fgn, path_rng
from roughvol.memdiag import acf, acf_with_bands, frac_diff, frac_diff_weights, vt_scaling
from roughvol.series import VolSeries

# V(t) slope on 1 + 0.01 fGn daily variance, N=3500, 100 seeds: (mean, sd)
VT_FGN_MC = {0.1: (0.197, 0.024), 0.3: (0.595, 0.035)}


def test_vt_iid_slope_one():
    v = np.random.default_rng(0).exponential(1.0, 20000)
    assert vt_scaling(v).slope == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("hurst", sorted(VT_FGN_MC))
def test_vt_fgn_variance(hurst):
    mean, sd = VT_FGN_MC[hurst]
    slopes = [vt_scaling(1 + 0.01 * fgn(3500, hurst, path_rng(7, i))).slope for i in range(20)]
    assert abs(np.mean(slopes) - 2 * hurst) < 4 * sd / np.sqrt(20) + abs(mean - 2 * hurst)


def test_vt_degenerate_and_short():
    with pytest.raises(DegenerateRegressionError):
        vt_scaling(np.full(400, 0.04))
    with pytest.raises(TooFewBlocksError):
        vt_scaling(np.ones(299))
    with pytest.raises(ParameterError):
        vt_scaling(np.ones(400), t_grid=[3])


def test_vt_block_counts_and_overlap():
    v = np.random.default_rng(1).exponential(1.0, 600)
    res = vt_scaling(v, t_grid=[1, 2, 7])
    assert res.n_blocks.tolist() == [600, 300, 85]
    assert res.v[1] == pytest.approx(v.reshape(300, 2).sum(axis=1).var(ddof=1))
    ov = vt_scaling(v, t_grid=[1, 2, 7], overlapping=True)
    assert ov.n_blocks.tolist() == [600, 599, 594]


def test_vt_accepts_series_and_exports():
    s = VolSeries.from_values(np.random.default_rng(2).exponential(1.0, 400) + 0.1, units="var")
    res = vt_scaling(s, t_grid=range(1, 11))
    rows = res.to_csv().strip().split("\n")
    assert rows[0] == "t,log_t,v,log_v" and len(rows) == 11
    assert res.to_dict()["overlapping"] is False


def test_frac_diff_weights_basics():
    w = frac_diff_weights(0.4, 5)
    assert w[0] == 1.0
    assert w[1] == pytest.approx(-0.4)
    assert w[2] == pytest.approx(-0.4 * 0.6 / 2)
    np.testing.assert_array_equal(frac_diff_weights(1.0, 3), [1.0, -1.0, 0.0, 0.0])
    with pytest.raises(ParameterError):
        frac_diff_weights(1.5, 3)


@given(st.floats(0.01, 1.0))
def test_frac_diff_weights_summable(d):
    w = frac_diff_weights(d, 2000)
    assert w[0] == 1.0
    assert np.all(w[1:] <= 0)
    assert np.sum(np.abs(w)) <= 2.0 + 1e-12


def test_frac_diff_identity_and_difference():
    x = np.random.default_rng(3).standard_normal(100)
    np.testing.assert_array_equal(frac_diff(x, 0.0, truncation=10).values, x[10:])
    np.testing.assert_allclose(frac_diff(x, 1.0, truncation=1).values, np.diff(x), rtol=1e-15)


def test_frac_diff_reintegration():
    x = np.random.default_rng(4).standard_normal(50)
    d1 = frac_diff(x, 1.0, truncation=1).values
    rebuilt = x[0] + np.concatenate([[0.0], np.cumsum(d1)])
    np.testing.assert_allclose(rebuilt, x, atol=1e-12)


def test_frac_diff_tail_warning():
    x = np.random.default_rng(5).standard_normal(800)
    with pytest.warns(RuntimeWarning):
        res = frac_diff(x, 0.4)
    assert res.tail_mass == pytest.approx(abs(res.weights.sum()))
    assert len(res.values) == 300
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        frac_diff(x, 1.0, truncation=10)


def test_frac_diff_too_short():
    with pytest.raises(SeriesTooShortError):
        frac_diff(np.zeros(500), 0.4)


def test_acf_lag_zero_and_bounds():
    x = np.random.default_rng(6).standard_normal(300)
    r = acf(x, 20)
    assert r[0] == 1.0
    assert np.all(np.abs(r) <= 1)
    with pytest.raises(SeriesTooShortError):
        acf(x, 300)
    with pytest.raises(DegenerateRegressionError):
        acf(np.ones(10), 2)


def test_white_noise_inside_fraction():
    frac = [acf_with_bands(np.random.default_rng(i).standard_normal(10000), 50).inside_fraction for i in range(20)]
    assert np.mean(frac) == pytest.approx(0.95, abs=0.03)


def test_rfsv_acf_mostly_outside(rfsv_3500):
    rep = acf_with_bands(rfsv_3500[0], 100)
    assert rep.inside_fraction < 0.2
    assert np.all(rep.acf > 0)
    assert rep.bartlett_band == pytest.approx(1.96 / np.sqrt(3500))


def test_acf_report_exports():
    rep = acf_with_bands(np.random.default_rng(8).standard_normal(200), 5)
    rows = rep.to_csv().strip().split("\n")
    assert rows[0] == "lag,acf,band_lo,band_hi" and len(rows) == 7
    assert rep.to_dict()["n"] == 200
    with pytest.raises(ParameterError):
        acf_with_bands(np.zeros(10), 0)
