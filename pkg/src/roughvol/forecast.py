"""Volatility forecasting: the RFSV predictor, AR/HAR baselines and the P-ratio harness.

The RFSV predictor of log-variance ``Delta`` days ahead is

    E[log s2_{t+D} | F_t] = cos(H pi)/pi * int_0^inf log s2_{t - D u} / ((u+1) u^{H+1/2}) du.

The kernel has the closed-form cumulative mass

    F(x) = cos(H pi)/pi * int_0^x du / ((u+1) u^{H+1/2}) = I_{x/(1+x)}(1/2 - H, 1/2 + H),

with ``I`` the regularized incomplete beta function, so each daily cell of
the Riemann sum can be integrated exactly, including the singular one at
``u = 0``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import InsufficientHistoryError, ParameterError, SingularSystemError
from .series import VolSeries

DEFAULT_EPS = 0.01
TRAINING_WINDOW = 500
DEFAULT_HORIZONS = (1, 5, 20)
DEFAULT_MODELS = ("AR5", "AR10", "HAR", "RFSV")


def _check_hurst(hurst: float, allow_zero: bool = False):
    lo_ok = hurst >= 0 if allow_zero else hurst > 0
    if not (lo_ok and hurst < 0.5):
        raise ParameterError(f"hurst must lie in (0, 1/2) for the RFSV predictor, got {hurst}")


def kernel_mass(x, hurst: float):
    """Fraction of the normalized RFSV kernel mass on u in [0, x]."""
    x = np.asarray(x, dtype=float)
    y = np.where(np.isinf(x), 1.0, x / (1 + np.where(np.isinf(x), 0.0, x)))
    return special.betainc(0.5 - hurst, 0.5 + hurst, np.clip(y, 0.0, 1.0))


def truncation_error(r: float, hurst: float) -> float:
    """Kernel mass beyond ``u = r``, i.e. the weight ignored by truncating at ``t - D r``."""
    _check_hurst(hurst, allow_zero=True)
    if not r > 0:
        raise ParameterError("truncation r must be positive")
    if r < 1:
        # 1/(1+r) rounds to 1 for tiny r; use the complement
        return float(1.0 - special.betainc(0.5 - hurst, 0.5 + hurst, r / (1.0 + r)))
    return float(special.betainc(0.5 + hurst, 0.5 - hurst, 1.0 / (1.0 + r)))


def truncation_for(eps: float, hurst: float) -> float:
    """Smallest r with truncation_error(r, hurst) <= eps."""
    _check_hurst(hurst, allow_zero=True)
    if not 0 < eps < 1:
        raise ParameterError("eps must lie in (0, 1)")
    y = special.betaincinv(0.5 + hurst, 0.5 - hurst, eps)
    if y <= 0.5:
        return float(1.0 / y - 1.0)
    # r < 1: invert the complement x = r / (1 + r) to keep digits
    x = special.betaincinv(0.5 - hurst, 0.5 + hurst, 1.0 - eps)
    return float(x / (1.0 - x))


def rfsv_weights(n_lags: int, horizon: float, hurst: float, step: float = 1.0,
                 normalize: bool = False) -> np.ndarray:
    """Weights on observations at lags ``0, step, 2 step, ...`` (most recent first).

    Observation ``j`` stands for the cell [(j - 1/2) step, (j + 1/2) step] of
    look-back time (the first cell is [0, step/2]) and receives the exact
    kernel mass of that cell.
    """
    _check_hurst(hurst, allow_zero=True)
    if not horizon > 0:
        raise ParameterError("horizon must be positive")
    j = np.arange(int(n_lags), dtype=float)
    hi = kernel_mass((j + 0.5) * step / horizon, hurst)
    lo = kernel_mass(np.maximum(j - 0.5, 0.0) * step / horizon, hurst)
    w = hi - lo
    if normalize:
        w = w / w.sum()
    return w


def _history_logvar(history) -> np.ndarray:
    if isinstance(history, VolSeries):
        return history.log_var()
    x = np.asarray(history, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ParameterError("history must be a finite 1-d log-variance array")
    return x


def rfsv_forecast_logvar(history, horizon: int, hurst: float, truncation_r: float | None = None,
                         normalize: bool = False) -> float:
    """RFSV log-variance forecast from daily history (last element = today).

    Uses the last ``ceil(horizon * r) + 1`` observations, with ``r`` defaulting
    to the truncation at which the ignored kernel mass is 1%.
    """
    _check_hurst(hurst)
    y = _history_logvar(history)
    r = truncation_for(DEFAULT_EPS, hurst) if truncation_r is None else float(truncation_r)
    if not r > 0:
        raise ParameterError("truncation r must be positive")
    n = int(math.ceil(horizon * r)) + 1
    if len(y) < n:
        raise InsufficientHistoryError(
            f"RFSV forecast with horizon {horizon} and r={r:.4g} needs {n} observations, got {len(y)}",
            required=n, available=len(y),
        )
    w = rfsv_weights(n, horizon, hurst, normalize=normalize)
    return float(w @ y[::-1][:n])


def conditional_variance_factor(hurst: float) -> float:
    """c(H) with Var[log sigma_{t+D} | F_t] = c nu^2 D^{2H}."""
    if not 0 < hurst < 1:
        raise ParameterError("hurst must lie in (0, 1)")
    return math.exp(special.gammaln(1.5 - hurst) - special.gammaln(hurst + 0.5) - special.gammaln(2 - 2 * hurst))


def variance_correction(horizon: float, hurst: float, nu: float) -> float:
    """Additive log correction 2 c nu^2 D^{2H} turning the log forecast into a variance forecast."""
    if not nu >= 0:
        raise ParameterError("nu must be nonnegative")
    return 2 * conditional_variance_factor(hurst) * nu**2 * horizon ** (2 * hurst)


def rfsv_forecast_var(history, horizon: int, hurst: float, nu: float,
                      truncation_r: float | None = None, normalize: bool = False) -> float:
    logf = rfsv_forecast_logvar(history, horizon, hurst, truncation_r, normalize)
    return math.exp(logf + variance_correction(horizon, hurst, nu))


# -- Gaussian conditioning oracle ---------------------------------------------


def gaussian_conditional_weights(cov_obs: np.ndarray, cov_target: np.ndarray, var_target: float):
    """Kriging weights ``b`` with E[Y | X = x] = b . x and the conditional variance."""
    try:
        chol = np.linalg.cholesky(cov_obs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("observation covariance not positive definite") from exc
    from scipy.linalg import cho_solve
    b = cho_solve((chol, True), cov_target)
    return b, float(var_target - cov_target @ b)


def fbm_conditioning_weights(n: int, horizon: float, hurst: float, step: float = 1.0):
    """Exact conditional-mean weights for an fBM observed at ``n`` equally spaced points.

    The process is pinned to zero at the oldest observation, so only
    increments are informative, as for the RFSV predictor. Returns weights
    on the observations ordered most recent first, the joint covariance
    of those observations and the conditional variance of the target.
    """
    from .fracproc import fbm_covariance
    # elapsed time since the oldest point, most recent first
    times = (n - 1 - np.arange(n)) * step
    obs = times[:-1]
    target = times[0] + horizon
    c_oo = fbm_covariance(obs[:, None], obs[None, :], hurst)
    c_ot = fbm_covariance(obs, target, hurst)
    b, cvar = gaussian_conditional_weights(c_oo, c_ot, float(fbm_covariance(target, target, hurst)))
    w = np.zeros(n)
    w[:-1] = b
    # the oldest value enters as a level shift: weights on the increments sum to one
    w[-1] = 1.0 - b.sum()
    sigma = np.zeros((n, n))
    sigma[:-1, :-1] = c_oo
    return w, sigma, cvar


def oracle_relative_error(n: int, horizon: float, hurst: float, step: float = 1.0) -> float:
    """Excess mean squared error of the RFSV weights over exact conditioning,
    relative to the exact conditional variance."""
    w_or, sigma, cvar = fbm_conditioning_weights(n, horizon, hurst, step)
    d = rfsv_weights(n, horizon, hurst, step, normalize=True) - w_or
    return float(d @ sigma @ d / cvar)


# -- AR and HAR ---------------------------------------------------------------


def levinson_durbin(r: np.ndarray, order: int):
    """Solve the Yule-Walker Toeplitz system.

    Returns (phi, innovation variance, reflection coefficients).
    """
    r = np.asarray(r, dtype=float)
    if order < 1 or len(r) < order + 1:
        raise ParameterError("need autocovariances up to the model order")
    if not r[0] > 0:
        raise SingularSystemError("zero-variance series; Yule-Walker system is singular")
    phi = np.zeros(order)
    refl = np.zeros(order)
    err = r[0]
    for k in range(order):
        acc = r[k + 1] - phi[:k] @ r[k:0:-1]
        kappa = acc / err
        prev = phi[:k].copy()
        phi[:k] = prev - kappa * prev[::-1]
        phi[k] = kappa
        refl[k] = kappa
        err *= 1 - kappa * kappa
        if not err > 0:
            raise SingularSystemError("Yule-Walker system is singular (perfectly predictable series)")
    return phi, err, refl


def yule_walker(x: np.ndarray, order: int):
    """AR coefficients from the biased sample autocovariance of the demeaned series."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    n = len(xc)
    r = np.array([xc[: n - k] @ xc[k:] / n for k in range(order + 1)])
    phi, s2, _ = levinson_durbin(r, order)
    return phi, s2, float(x.mean())


def _ar_horizon_coeffs(phi: np.ndarray, horizon: int) -> np.ndarray:
    """First row of the companion matrix raised to ``horizon``."""
    p = len(phi)
    comp = np.zeros((p, p))
    comp[0] = phi
    comp[1:, :-1] = np.eye(p - 1)
    return np.linalg.matrix_power(comp, horizon)[0]


def _har_design(y: np.ndarray):
    """Rows [1, y_t, mean of last 5, mean of last 20] for t = 19 .. len(y)-1."""
    cs = np.concatenate([[0.0], np.cumsum(y)])
    t = np.arange(19, len(y))
    m5 = (cs[t + 1] - cs[t - 4]) / 5
    m20 = (cs[t + 1] - cs[t - 19]) / 20
    return np.column_stack([np.ones(len(t)), y[t], m5, m20]), t


@dataclass
class ForecastModel:
    kind: str
    horizon: int
    params: dict
    training_window: int = TRAINING_WINDOW

    def __post_init__(self):
        if self.kind not in ("RFSV", "AR", "HAR"):
            raise ParameterError(f"unknown model kind {self.kind!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ParameterError("horizon must be a positive integer")
        if self.kind == "AR" and self.params.get("order", 0) < 1:
            raise ParameterError("AR order must be at least 1")
        if self.kind == "RFSV" and self.params.get("truncation_r") is not None and not self.params["truncation_r"] > 0:
            raise ParameterError("RFSV truncation r must be positive")
        for v in self.params.values():
            if isinstance(v, (float, np.ndarray)) and not np.all(np.isfinite(v)):
                raise ParameterError("model coefficients must be finite")

    def predict(self, history) -> float:
        """Forecast ``horizon`` steps past the last element of ``history``."""
        y = _history_logvar(history) if isinstance(history, VolSeries) else np.asarray(history, dtype=float)
        p = self.params
        if self.kind == "AR":
            c = np.asarray(p["C"])
            if len(y) < len(c):
                raise InsufficientHistoryError("history shorter than AR order", required=len(c))
            return float(p["K0"] + c @ y[::-1][: len(c)])
        if self.kind == "HAR":
            if len(y) < 20:
                raise InsufficientHistoryError("HAR needs 20 observations", required=20)
            reg = np.array([1.0, y[-1], y[-5:].mean(), y[-20:].mean()])
            return float(reg @ np.array([p["K0"], p["C0"], p["C5"], p["C20"]]))
        return rfsv_forecast_logvar(y, self.horizon, p["hurst"], p.get("truncation_r"))

    def to_dict(self) -> dict:
        conv = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"kind": self.kind, "horizon": int(self.horizon), "params": conv,
                "training_window": int(self.training_window)}


def _training_slice(history, training_window: int) -> np.ndarray:
    y = _history_logvar(history) if isinstance(history, VolSeries) else np.asarray(history, dtype=float)
    if len(y) < training_window:
        raise InsufficientHistoryError(
            f"need {training_window} observations to fit, got {len(y)}",
            required=training_window, available=len(y),
        )
    return y[len(y) - training_window:]


def ar_fit(history, order: int, horizon: int, training_window: int = TRAINING_WINDOW) -> ForecastModel:
    """Yule-Walker AR(p) on the trailing window, iterated to a direct horizon-step rule
    ``K0 + sum_i C_i y_{t-i}``."""
    if int(order) != order or order < 1:
        raise ParameterError("AR order must be a positive integer")
    y = _training_slice(history, training_window)
    phi, s2, mu = yule_walker(y, int(order))
    c = _ar_horizon_coeffs(phi, int(horizon))
    return ForecastModel("AR", int(horizon), {"order": int(order), "phi": phi, "C": c,
                                             "K0": float(mu * (1 - c.sum())), "mean": mu,
                                             "sigma2": float(s2)}, training_window)


def har_fit(history, horizon: int, training_window: int = TRAINING_WINDOW) -> ForecastModel:
    """OLS of y_{t+D} on today's value and the 5- and 20-day trailing means."""
    y = _training_slice(history, training_window)
    X, t = _har_design(y)
    keep = t + horizon < len(y)
    X, target = X[keep], y[t[keep] + horizon]
    if len(target) <= 4:
        raise InsufficientHistoryError("training window too short for HAR at this horizon")
    xtx = X.T @ X
    if np.linalg.cond(xtx) > 1e12:
        raise SingularSystemError("HAR normal equations are singular")
    beta = np.linalg.solve(xtx, X.T @ target)
    resid = target - X @ beta
    s2 = resid @ resid / (len(target) - 4)
    se = np.sqrt(np.diag(np.linalg.inv(xtx)) * s2)
    names = ("K0", "C0", "C5", "C20")
    params = {k: float(v) for k, v in zip(names, beta)}
    params.update({f"se_{k}": float(v) for k, v in zip(names, se)})
    return ForecastModel("HAR", int(horizon), params, training_window)


# -- evaluation harness -------------------------------------------------------


@dataclass
class ForecastRecord:
    date: object
    horizon: int
    model: str
    predicted_logvar: float | None
    predicted_var: float | None
    realized_logvar: float | None


@dataclass
class PRatioTable:
    label: str
    target: str
    p: dict  # {horizon: {model: P}}
    n_forecasts: dict
    hurst: float
    nu: float
    records: list = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        rows = {f"{self.label} D={h}": {m: float(v) for m, v in sorted(ms.items())}
                for h, ms in sorted(self.p.items())}
        return {"label": self.label, "target": self.target, "table": rows,
                "n_forecasts": {str(h): n for h, n in sorted(self.n_forecasts.items())},
                "hurst": self.hurst, "nu": self.nu, "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def records_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "horizon", "model", "predicted_logvar", "predicted_var", "realized_logvar"])
        fmt = lambda v: "" if v is None else repr(float(v))
        for r in self.records:
            w.writerow([str(r.date), r.horizon, r.model, fmt(r.predicted_logvar),
                        fmt(r.predicted_var), fmt(r.realized_logvar)])
        return buf.getvalue()


def p_ratio(actual, predicted, mean: float) -> float:
    """Sum of squared forecast errors over the sum of squared deviations from ``mean``."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    den = np.sum((actual - mean) ** 2)
    if not den > 0:
        raise SingularSystemError("target has no variance over the evaluation range")
    return float(np.sum((actual - predicted) ** 2) / den)


def _parse_model(name: str):
    name = name.upper()
    if name in ("RFSV", "HAR", "MEAN"):
        return name, None
    if name.startswith("AR") and name[2:].isdigit():
        return "AR", int(name[2:])
    raise ParameterError(f"unknown model {name!r}; use RFSV, HAR, MEAN or AR<p>")


def evaluate_p_ratio(
    series,
    models=DEFAULT_MODELS,
    horizons=DEFAULT_HORIZONS,
    *,
    target: str = "logvar",
    training_window: int = TRAINING_WINDOW,
    hurst: float | None = None,
    nu: float | None = None,
    rolling_hurst: bool = False,
    keep_records: bool = True,
    label: str | None = None,
) -> PRatioTable:
    """Rolling out-of-sample P ratios.

    Forecast origins are ``k = training_window, ..., N-1-D``; AR and HAR are
    refitted on the trailing ``training_window`` observations at each origin.
    The RFSV predictor uses all history up to the origin with its weights
    renormalized to unit mass. ``target='var'`` evaluates variance forecasts:
    RFSV through the lognormal correction, AR/HAR refitted on variance levels.
    """
    from .scaling import fit_scaling

    if target not in ("logvar", "var"):
        raise ParameterError("target must be 'logvar' or 'var'")
    if isinstance(series, VolSeries):
        logvar, dates, label = series.log_var(), series.dates, label if label is not None else series.label
        gaps = series.n_gaps
    else:
        logvar = np.asarray(series, dtype=float)
        dates, gaps = np.arange(len(logvar)), 0
        label = label or ""
    n = len(logvar)
    horizons = [int(h) for h in horizons]
    if min(horizons) < 1:
        raise ParameterError("horizons must be positive")
    if n <= training_window + max(horizons):
        raise InsufficientHistoryError(
            f"series of length {n} too short for window {training_window} and horizon {max(horizons)}",
            required=training_window + max(horizons) + 1, available=n,
        )
    parsed = {m: _parse_model(m) for m in models}
    if hurst is None or nu is None:
        rep = fit_scaling(0.5 * logvar)
        hurst = rep.hurst_hat if hurst is None else hurst
        nu = rep.nu_hat if nu is None else nu
    if "RFSV" in [k for k, _ in parsed.values()]:
        _check_hurst(hurst)
    y = logvar if target == "logvar" else np.exp(logvar)
    full_mean = float(y.mean())
    origins_all = np.arange(training_window, n)
    if rolling_hurst:
        h_roll = {int(k): fit_scaling(0.5 * logvar[: k + 1]).hurst_hat for k in origins_all}

    table, counts, records = {}, {}, []
    for h in horizons:
        ks = np.arange(training_window, n - h)
        actual = y[ks + h]
        preds = {}
        for name, (kind, order) in parsed.items():
            out = np.empty(len(ks))
            if kind == "RFSV":
                corr = variance_correction(h, hurst, nu) if target == "var" else 0.0
                if not rolling_hurst:
                    w = rfsv_weights(n, h, hurst)
                    cw = np.cumsum(w)
                for i, k in enumerate(ks):
                    if rolling_hurst:
                        w = rfsv_weights(k + 1, h, h_roll[int(k)])
                        cw = np.cumsum(w)
                        corr = variance_correction(h, h_roll[int(k)], nu) if target == "var" else 0.0
                    f = w[: k + 1] @ logvar[k::-1] / cw[k]
                    out[i] = f if target == "logvar" else math.exp(f + corr)
            elif kind == "MEAN":
                out[:] = full_mean
            else:
                for i, k in enumerate(ks):
                    win = y[k + 1 - training_window: k + 1]
                    mdl = ar_fit(win, order, h, training_window) if kind == "AR" else har_fit(win, h, training_window)
                    out[i] = mdl.predict(win)
            preds[name] = out
        table[h] = {name: p_ratio(actual, p, full_mean) for name, p in preds.items()}
        counts[h] = len(ks)
        if keep_records:
            for name, p in preds.items():
                for k, v in zip(ks, p):
                    lv, vv = (v, None) if target == "logvar" else (None, v)
                    records.append(ForecastRecord(dates[k], h, name, lv, vv, float(logvar[k + h])))
    meta = {"training_window": training_window, "calendar_gaps": gaps, "rolling_hurst": rolling_hurst,
            "skipped_records": 0}
    return PRatioTable(label, target, table, counts, float(hurst), float(nu), records, meta)
