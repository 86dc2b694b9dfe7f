"""Structure-function estimation of the roughness of a log-volatility series.

For a lag of ``delta`` observations and moment order ``q``,

    m(q, delta) = mean over offsets o of  mean_k |x[o + k*delta] - x[o + (k-1)*delta]|^q

where ``x`` is log-volatility. Under fBM-like scaling ``m(q, delta) ~ b_q delta^zeta_q``
with ``zeta_q = q H``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateRegressionError, ParameterError, SeriesTooShortError
from .fracproc import gaussian_abs_moment
from .series import VolSeries, as_log_vol

DEFAULT_Q_GRID = (0.5, 1.0, 1.5, 2.0, 3.0)
DEFAULT_DELTA_GRID = tuple(range(1, 31))


def _check_delta(n: int, delta: int):
    if int(delta) != delta or delta < 1:
        raise ParameterError(f"delta must be a positive integer, got {delta}")
    if n <= delta:
        raise SeriesTooShortError(
            f"series of length {n} too short for lag {delta}", length=n, required=int(delta) + 1
        )


def m_q_delta(series, q: float, delta: int) -> float:
    """Offset-averaged structure function m(q, delta) of the log-volatility."""
    x = as_log_vol(series)
    if not q > 0:
        raise ParameterError(f"q must be positive, got {q}")
    _check_delta(len(x), delta)
    return float(structure_function(x, [q], [delta])[0, 0])


def structure_function(x: np.ndarray, q_grid, delta_grid) -> np.ndarray:
    """m(q, delta) matrix of shape (len(q_grid), len(delta_grid)) for a raw array."""
    x = np.asarray(x, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    out = np.empty((len(q_grid), len(delta_grid)))
    for j, delta in enumerate(delta_grid):
        delta = int(delta)
        _check_delta(len(x), delta)
        absinc = np.abs(x[delta:] - x[:-delta])
        # increment i belongs to the subsample starting at offset i mod delta
        offset = np.arange(len(absinc)) % delta
        counts = np.bincount(offset, minlength=delta)
        for i, q in enumerate(q_grid):
            sums = np.bincount(offset, weights=absinc**q, minlength=delta)
            out[i, j] = np.mean(sums / counts)
    return out


@dataclass
class ScalingReport:
    q_grid: np.ndarray
    delta_grid: np.ndarray
    m_values: np.ndarray
    zeta: np.ndarray
    zeta_stderr: np.ndarray
    intercepts: np.ndarray
    residuals: np.ndarray
    hurst_hat: float
    nu_hat: float
    n_obs: int
    label: str = ""
    meta: dict = field(default_factory=dict)

    def fitted(self) -> np.ndarray:
        """Fitted log m(q, delta) from the per-q regressions."""
        return self.intercepts[:, None] + self.zeta[:, None] * np.log(self.delta_grid)[None, :]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_obs": int(self.n_obs),
            "q_grid": self.q_grid.tolist(),
            "delta_grid": self.delta_grid.tolist(),
            "m_values": self.m_values.tolist(),
            "zeta": self.zeta.tolist(),
            "zeta_stderr": self.zeta_stderr.tolist(),
            "intercepts": self.intercepts.tolist(),
            "residuals": self.residuals.tolist(),
            "hurst_hat": float(self.hurst_hat),
            "nu_hat": float(self.nu_hat),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingReport":
        arr = lambda k: np.asarray(d[k], dtype=float)
        return cls(
            q_grid=arr("q_grid"),
            delta_grid=np.asarray(d["delta_grid"], dtype=int),
            m_values=arr("m_values"),
            zeta=arr("zeta"),
            zeta_stderr=arr("zeta_stderr"),
            intercepts=arr("intercepts"),
            residuals=arr("residuals"),
            hurst_hat=float(d["hurst_hat"]),
            nu_hat=float(d["nu_hat"]),
            n_obs=int(d["n_obs"]),
            label=d.get("label", ""),
            meta=d.get("meta", {}),
        )

    def to_csv(self) -> str:
        """Flat (q, delta, m, fitted) rows; ``fitted`` is on the m scale."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q", "delta", "log_delta", "m", "log_m", "fitted_m"])
        fit = np.exp(self.fitted())
        for i, q in enumerate(self.q_grid):
            for j, d in enumerate(self.delta_grid):
                m = self.m_values[i, j]
                w.writerow([repr(float(q)), int(d), repr(float(np.log(d))), repr(float(m)),
                            repr(float(np.log(m))), repr(float(fit[i, j]))])
        return buf.getvalue()


def _ols(xv: np.ndarray, yv: np.ndarray):
    """Slope, intercept, slope standard error, residuals."""
    X = np.column_stack([np.ones_like(xv), xv])
    coef, *_ = np.linalg.lstsq(X, yv, rcond=None)
    resid = yv - X @ coef
    dof = len(yv) - 2
    if dof > 0:
        s2 = resid @ resid / dof
        se = np.sqrt(s2 / np.sum((xv - xv.mean()) ** 2))
    else:
        se = np.nan
    return coef[1], coef[0], se, resid


def fit_from_m(m_values, q_grid, delta_grid, n_obs: int = 0, label: str = "") -> ScalingReport:
    """Regressions on a precomputed m(q, delta) matrix."""
    q_grid = np.asarray(q_grid, dtype=float)
    delta_grid = np.asarray(delta_grid, dtype=int)
    m_values = np.asarray(m_values, dtype=float)
    if len(delta_grid) < 2 or len(np.unique(delta_grid)) < 2:
        raise DegenerateRegressionError("need at least two distinct lags to regress on")
    if not np.all(m_values > 0):
        raise DegenerateRegressionError(
            "structure function vanishes on part of the grid; log-regression undefined",
            zero_cells=int(np.sum(m_values <= 0)),
        )
    logd = np.log(delta_grid.astype(float))
    zeta, icpt, se, res = [], [], [], []
    for row in np.log(m_values):
        s, c, e, r = _ols(logd, row)
        zeta.append(s)
        icpt.append(c)
        se.append(e)
        res.append(r)
    zeta = np.array(zeta)
    icpt = np.array(icpt)
    hurst = float(zeta @ q_grid / (q_grid @ q_grid))
    # intercept of order q estimates log(nu^q K_q); K_2 = 1
    k = int(np.argmin(np.abs(q_grid - 2.0)))
    q = q_grid[k]
    nu = float(np.exp((icpt[k] - np.log(gaussian_abs_moment(q))) / q))
    return ScalingReport(q_grid, delta_grid, m_values, zeta, np.array(se), icpt,
                         np.array(res), hurst, nu, int(n_obs), label)


def fit_scaling(series, q_grid=DEFAULT_Q_GRID, delta_grid=DEFAULT_DELTA_GRID) -> ScalingReport:
    """Per-q log-log regressions of m(q, delta) on delta, plus H and nu estimates.

    ``hurst_hat`` is the slope of zeta_q against q through the origin and
    ``nu_hat = exp(intercept_2 / 2)``.
    """
    x = as_log_vol(series)
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.size == 0 or np.any(q_grid <= 0):
        raise ParameterError("q_grid must be nonempty and positive")
    m = structure_function(x, q_grid, delta_grid)
    label = series.label if isinstance(series, VolSeries) else ""
    return fit_from_m(m, q_grid, delta_grid, len(x), label)


@dataclass
class IncrementMoments:
    delta: int
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    # normal fit at lag 1 rescaled by delta^H, for the overlay
    overlay_mean: float
    overlay_std: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("delta", "n", "mean", "variance", "skewness", "excess_kurtosis", "overlay_mean", "overlay_std")}
        d["hist_counts"] = self.hist_counts.tolist()
        d["hist_edges"] = self.hist_edges.tolist()
        return d


def increment_moments(series, delta: int, bins: int = 50, hurst: float | None = None) -> IncrementMoments:
    """Moments and histogram of overlapping lag-``delta`` log-volatility increments.

    The overlay parameters are the lag-1 normal fit with its standard
    deviation scaled by ``delta**hurst`` (``hurst`` estimated if omitted).
    """
    x = as_log_vol(series)
    _check_delta(len(x), delta)
    inc = x[delta:] - x[:-delta]
    one = np.diff(x)
    if hurst is None:
        hurst = fit_scaling(x, delta_grid=range(1, min(31, len(x) // 2))).hurst_hat
    counts, edges = np.histogram(inc, bins=bins)
    return IncrementMoments(
        delta=int(delta),
        n=len(inc),
        mean=float(inc.mean()),
        variance=float(inc.var(ddof=1)),
        skewness=float(stats.skew(inc)),
        excess_kurtosis=float(stats.kurtosis(inc)),
        hist_counts=counts,
        hist_edges=edges,
        overlay_mean=float(one.mean()),
        overlay_std=float(one.std(ddof=1) * delta**hurst),
    )


def split_reestimate(series, n_segments: int, q_grid=DEFAULT_Q_GRID,
                     delta_grid=DEFAULT_DELTA_GRID) -> list[ScalingReport]:
    """Independent scaling fits on ``n_segments`` contiguous pieces."""
    if int(n_segments) != n_segments or n_segments < 1:
        raise ParameterError("n_segments must be a positive integer")
    x = as_log_vol(series)
    need = max(delta_grid) + 1
    pieces = np.array_split(np.arange(len(x)), n_segments)
    if min(len(p) for p in pieces) < need:
        raise SeriesTooShortError(
            f"segments of length {min(len(p) for p in pieces)} too short for max lag {max(delta_grid)}",
            required=need * n_segments,
        )
    out = []
    for k, idx in enumerate(pieces):
        sub = series.slice(idx[0], idx[-1] + 1) if isinstance(series, VolSeries) else x[idx]
        rep = fit_scaling(sub, q_grid, delta_grid)
        rep.meta = {"segment": k, "start": int(idx[0]), "stop": int(idx[-1] + 1)}
        out.append(rep)
    return out
