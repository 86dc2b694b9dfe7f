"""Covariance-structure products and the smoothing bias of windowed proxies.

The smoothing-bias model is a fractional Stein-Stein variance process
``v_{t+D} - v_t = a (W^H_{t+D} - W^H_t)`` observed only through window
averages of width ``delta``. Then

    E[(vhat_{t+D} - vhat_t)^2] = a^2 D^{2H} f(delta / D),
    f(theta) = [(1+theta)^p - 2 - 2 theta^p + (1-theta)^p] / (theta^2 (p-1) p),  p = 2H + 2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ParameterError, SeriesTooShortError
from .fracproc import fou_variogram, lognormal_vol_cov
from .series import VolSeries

TABLE_LAGS = tuple(range(1, 101))
_SERIES_SWITCH = 0.05


def empirical_autocov(series, lags, transform: str = "log") -> np.ndarray:
    """Biased (1/N) sample autocovariance of log-vol (``log``) or vol (``level``)."""
    if transform not in ("log", "level"):
        raise ParameterError(f"transform must be 'log' or 'level', got {transform!r}")
    if isinstance(series, VolSeries):
        x = series.log_vol() if transform == "log" else series.vol()
    else:
        x = np.asarray(series, dtype=float)
        if transform == "level":
            x = np.exp(x)
    lags = np.asarray(lags, dtype=int)
    n = len(x)
    if np.any(lags < 0):
        raise ParameterError("lags must be nonnegative")
    if lags.size and lags.max() >= n:
        raise SeriesTooShortError(f"series of length {n} too short for lag {lags.max()}",
                                  length=n, required=int(lags.max()) + 1)
    xc = x - x.mean()
    return np.array([xc[: n - k] @ xc[k:] / n for k in lags])


def affine_fit(xv, yv) -> tuple[float, float, float]:
    """Slope, intercept and R^2 of an ordinary least-squares line."""
    xv = np.asarray(xv, dtype=float)
    yv = np.asarray(yv, dtype=float)
    slope, icpt = np.polyfit(xv, yv, 1)
    resid = yv - (icpt + slope * xv)
    tot = np.sum((yv - yv.mean()) ** 2)
    r2 = 1.0 - resid @ resid / tot if tot > 0 else 1.0
    return float(slope), float(icpt), float(r2)


def fsv_m2_curve(hurst: float, nu: float, alpha: float, lags) -> np.ndarray:
    """Theoretical m(2, lag) = 2 (Var - Cov) of a stationary fOU log-volatility."""
    lags = np.asarray(lags, dtype=float)
    if alpha == 0:
        if not 0 < hurst < 1 or not nu > 0:
            raise ParameterError("need 0 < hurst < 1 and nu > 0")
        return nu**2 * lags ** (2 * hurst)
    return np.array([fou_variogram(hurst, nu, alpha, float(d)) for d in lags])


def vol_cov_curve(hurst, nu, alpha, mean_level, lags, small_alpha: bool = False) -> np.ndarray:
    """E[sigma_{t+lag} sigma_t] over a lag grid."""
    return np.array([lognormal_vol_cov(hurst, nu, alpha, mean_level, float(d), small_alpha=small_alpha)
                     for d in np.asarray(lags, dtype=float)])


def _f_series(theta: np.ndarray, p: float) -> np.ndarray:
    """Even-order binomial expansion of the bracket, divided by theta^2 p (p-1)."""
    acc = np.zeros_like(theta)
    for k in range(2, 40, 2):
        acc += special.binom(p, k) * theta ** (k - 2)
    acc *= 2
    acc -= 2 * theta ** (p - 2)
    return acc / (p * (p - 1))


def smoothing_bias_f(theta, hurst: float = 0.14):
    """Multiplicative bias f(theta) of m(2, D) from window averaging, theta = delta / D."""
    if not 0 < hurst < 1:
        raise ParameterError(f"hurst must lie in (0, 1), got {hurst}")
    th = np.asarray(theta, dtype=float)
    if np.any(~(th > 0)) or np.any(th > 1):
        raise ParameterError("theta must lie in (0, 1]")
    p = 2 * hurst + 2
    with np.errstate(invalid="ignore"):
        direct = ((1 + th) ** p - 2 - 2 * th**p + (1 - th) ** p) / (th**2 * (p - 1) * p)
    out = np.where(th < _SERIES_SWITCH, _f_series(np.minimum(th, _SERIES_SWITCH), p), direct)
    return float(out) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class SmoothingSpec:
    hurst: float
    alpha_amp: float
    window: float
    lags: tuple = TABLE_LAGS

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ParameterError(f"hurst must lie in (0, 1), got {self.hurst}")
        if not self.alpha_amp > 0:
            raise ParameterError("alpha_amp must be positive")
        if not self.window > 0:
            raise ParameterError("window must be positive")
        lags = tuple(float(d) for d in self.lags)
        if not lags or min(lags) <= 0:
            raise ParameterError("lags must be positive")
        if self.window >= min(lags):
            raise ParameterError(f"window {self.window} must be shorter than the smallest lag {min(lags)}")
        object.__setattr__(self, "lags", lags)


def smoothed_m2(spec: SmoothingSpec) -> np.ndarray:
    lags = np.asarray(spec.lags)
    return spec.alpha_amp**2 * lags ** (2 * spec.hurst) * smoothing_bias_f(spec.window / lags, spec.hurst)


def smoothed_m2_quad(hurst: float, alpha_amp: float, window: float, lag: float) -> float:
    """Direct 2-d quadrature of the window-averaged second moment.

    Integrates (a/delta)^2 (|u-s+D|^{2H} - |u-s|^{2H}) over the square, split
    along the diagonal so the cusp at u = s sits on an edge.
    """
    h2 = 2 * hurst
    g = lambda s, u: abs(u - s + lag) ** h2 - abs(u - s) ** h2
    opts = dict(epsabs=0.0, epsrel=1e-12)
    below, _ = integrate.dblquad(g, 0.0, window, 0.0, lambda u: u, **opts)
    above, _ = integrate.dblquad(g, 0.0, window, lambda u: u, window, **opts)
    return alpha_amp**2 / window**2 * (below + above)


@dataclass(frozen=True)
class SmoothingFit:
    alpha_hat: float
    hurst_hat: float
    slope: float
    intercept: float


def smoothing_regression(spec: SmoothingSpec) -> SmoothingFit:
    """Regress log smoothed m(2, D) on log D: slope 2H_eff, intercept log a_eff^2."""
    lags = np.asarray(spec.lags)
    slope, icpt = np.polyfit(np.log(lags), np.log(smoothed_m2(spec)), 1)
    return SmoothingFit(float(math.exp(icpt / 2)), float(slope / 2), float(slope), float(icpt))


# -- plot data --------------------------------------------------------------


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def autocov_vs_power_csv(lags, cov, hurst: float) -> str:
    """(lag^{2H}, cov) rows, the linearity check in lag^{2H}."""
    lags = np.asarray(lags, dtype=float)
    return _rows_csv(["delta", "delta_pow_2h", "cov"], zip(lags, lags ** (2 * hurst), cov))


def loglog_csv(lags, values, name: str = "value") -> str:
    lags = np.asarray(lags, dtype=float)
    values = np.asarray(values, dtype=float)
    return _rows_csv(["delta", "log_delta", f"log_{name}"], zip(lags, np.log(lags), np.log(values)))
