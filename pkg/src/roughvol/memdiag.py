"""Long-memory diagnostics: integrated-variance scaling, fractional
differencing and autocorrelations with white-noise bands."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegressionError, ParameterError, SeriesTooShortError, TooFewBlocksError
from .series import VolSeries

DEFAULT_T_GRID = tuple(range(1, 31))
MIN_BLOCKS = 10
FRAC_DIFF_TRUNCATION = 500
TAIL_WARN = 0.01


@dataclass
class VtScaling:
    slope: float
    intercept: float
    t_grid: np.ndarray
    v: np.ndarray
    n_blocks: np.ndarray
    overlapping: bool = False

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "t_grid": self.t_grid.tolist(),
                "v": self.v.tolist(), "n_blocks": self.n_blocks.tolist(), "overlapping": self.overlapping}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "log_t", "v", "log_v"])
        for t, v in zip(self.t_grid, self.v):
            w.writerow([int(t), repr(float(np.log(t))), repr(float(v)), repr(float(np.log(v)))])
        return buf.getvalue()


def _daily_variance(series) -> np.ndarray:
    if isinstance(series, VolSeries):
        return series.variance()
    v = np.asarray(series, dtype=float)
    if v.ndim != 1 or not np.all(np.isfinite(v)):
        raise ParameterError("variance series must be a finite 1-d array")
    return v


def vt_scaling(series, t_grid=DEFAULT_T_GRID, *, min_blocks: int = MIN_BLOCKS,
               overlapping: bool = False) -> VtScaling:
    """Scaling of V(t), the variance of t-day integrated variance.

    V(t) is the sample variance of sums of ``t`` consecutive daily variances,
    over non-overlapping blocks by default; log V(t) is regressed on log t.
    """
    v = _daily_variance(series)
    t_grid = np.asarray(t_grid, dtype=int)
    if t_grid.size < 2 or np.any(t_grid < 1):
        raise ParameterError("t_grid needs at least two positive block lengths")
    if len(v) < t_grid.max() * min_blocks:
        raise TooFewBlocksError(
            f"{len(v)} observations give fewer than {min_blocks} blocks of length {t_grid.max()}",
            required=int(t_grid.max() * min_blocks), available=len(v),
        )
    cs = np.concatenate([[0.0], np.cumsum(v)])
    out, nb = [], []
    for t in t_grid:
        if overlapping:
            sums = cs[t:] - cs[:-t]
        else:
            k = len(v) // t
            sums = cs[t: k * t + 1: t] - cs[0: (k - 1) * t + 1: t]
        var = sums.var(ddof=1)
        # rounding noise of a constant input is not variance
        out.append(var if var > (1e-12 * np.abs(sums).max()) ** 2 else 0.0)
        nb.append(len(sums))
    out = np.array(out)
    if not np.all(out > 0):
        raise DegenerateRegressionError("block sums have zero variance; V(t) scaling undefined")
    slope, icpt = np.polyfit(np.log(t_grid), np.log(out), 1)
    return VtScaling(float(slope), float(icpt), t_grid, out, np.array(nb), overlapping)


def frac_diff_weights(d: float, length: int) -> np.ndarray:
    """Binomial weights pi_0..pi_length of (1 - L)^d."""
    if not 0 <= d <= 1:
        raise ParameterError(f"d must lie in [0, 1], got {d}")
    w = np.empty(length + 1)
    w[0] = 1.0
    for j in range(1, length + 1):
        w[j] = w[j - 1] * (j - 1 - d) / j
    return w


@dataclass
class FracDiffResult:
    values: np.ndarray
    weights: np.ndarray
    tail_mass: float


def frac_diff(x, d: float, truncation: int = FRAC_DIFF_TRUNCATION) -> FracDiffResult:
    """Apply (1 - L)^d with weights truncated at lag ``truncation``.

    Output element i corresponds to input index ``i + truncation``, so the
    result has ``N - truncation`` elements. ``tail_mass`` is the weight
    mass dropped, sum_{j <= L} pi_j (the full filter sums to zero for d > 0).
    """
    if isinstance(x, VolSeries):
        x = x.log_vol()
    x = np.asarray(x, dtype=float)
    if int(truncation) != truncation or truncation < 0:
        raise ParameterError("truncation must be a nonnegative integer")
    if len(x) <= truncation:
        raise SeriesTooShortError(f"series of length {len(x)} not longer than truncation {truncation}",
                                  length=len(x), required=int(truncation) + 1)
    w = frac_diff_weights(d, int(truncation))
    tail = float(abs(w.sum())) if d > 0 else 0.0
    if tail > TAIL_WARN:
        warnings.warn(f"fractional differencing truncation drops {tail:.3g} of the weight mass",
                      RuntimeWarning, stacklevel=2)
    return FracDiffResult(np.convolve(x, w, mode="valid"), w, tail)


@dataclass
class AcfReport:
    lags: np.ndarray
    acf: np.ndarray
    bartlett_band: float
    inside_fraction: float
    n: int

    def to_dict(self) -> dict:
        return {"lags": self.lags.tolist(), "acf": self.acf.tolist(), "bartlett_band": self.bartlett_band,
                "inside_fraction": self.inside_fraction, "n": self.n}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lag", "acf", "band_lo", "band_hi"])
        w.writerow([0, repr(1.0), repr(-self.bartlett_band), repr(self.bartlett_band)])
        for k, a in zip(self.lags, self.acf):
            w.writerow([int(k), repr(float(a)), repr(-self.bartlett_band), repr(self.bartlett_band)])
        return buf.getvalue()


def acf(x, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag (biased normalization)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= max_lag:
        raise SeriesTooShortError(f"series of length {n} too short for lag {max_lag}",
                                  length=n, required=int(max_lag) + 1)
    xc = x - x.mean()
    c0 = xc @ xc
    if not c0 > 0:
        raise DegenerateRegressionError("constant series has no autocorrelation")
    out = np.array([xc[: n - k] @ xc[k:] / c0 for k in range(max_lag + 1)])
    out[0] = 1.0
    return out


def acf_with_bands(x, max_lag: int) -> AcfReport:
    """Autocorrelations at lags 1..max_lag with the white-noise band 1.96/sqrt(N)."""
    if isinstance(x, VolSeries):
        x = x.log_vol()
    x = np.asarray(x, dtype=float)
    if int(max_lag) != max_lag or max_lag < 1:
        raise ParameterError("max_lag must be a positive integer")
    r = acf(x, int(max_lag))
    band = 1.96 / np.sqrt(len(x))
    inside = float(np.mean(np.abs(r[1:]) <= band))
    return AcfReport(np.arange(1, max_lag + 1), r[1:], float(band), inside, len(x))
