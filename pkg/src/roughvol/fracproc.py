"""Fractional Brownian motion and fractional Ornstein-Uhlenbeck processes.

Paths are generated exactly on a uniform grid by circulant embedding of the
fractional Gaussian noise covariance (Davies-Harte). The fOU path is then
obtained from the fBM increments through the Euler recursion

    X[n+1] - X[n] = nu * (W[n+1] - W[n]) + alpha * dt * (m - X[n]).

Stationary fOU second-order structure comes from the spectral representation

    Cov[X_{t+lag}, X_t] = K * int_R exp(i*lag*x) |x|^(1-2H) / (alpha^2 + x^2) dx,
    K = nu^2 * Gamma(2H+1) * sin(pi*H) / (2*pi),

evaluated by adaptive quadrature.
"""

from __future__ import annotations

import cmath
import io
import json
import math
import struct
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np
from scipy import integrate, special
from scipy.signal import lfilter

from .errors import EmbeddingError, ParameterError, QuadratureError, VolOverflowError

QUAD_RTOL = 1e-8
_MAX_EMBED_DOUBLINGS = 4


def path_rng(seed: int, index: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for path ``index`` under master ``seed``.

    Streams for different indices do not depend on how many paths are drawn
    or in which order; ``stream`` separates independent draws belonging to
    the same path (e.g. volatility and price noise).
    """
    if seed < 0 or index < 0 or stream < 0:
        raise ParameterError("seed, path index and stream must be nonnegative")
    ss = np.random.SeedSequence([int(seed), int(index), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def gaussian_abs_moment(q: float) -> float:
    """E|Z|^q for a standard normal Z (the constant K_q)."""
    return 2.0 ** (q / 2) * special.gamma((q + 1) / 2) / math.sqrt(math.pi)


def fbm_covariance(s, t, hurst: float):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2 * hurst
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2)


@dataclass(frozen=True)
class FbmParams:
    hurst: float
    n_points: int
    dt: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ParameterError(f"hurst must lie in (0, 1), got {self.hurst}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ParameterError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class FouParams:
    fbm: FbmParams
    nu: float
    alpha: float
    mean_level: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be nonnegative, got {self.alpha}")


@dataclass(frozen=True)
class GaussianPath:
    times: np.ndarray
    values: np.ndarray
    params: Union[FbmParams, FouParams, None] = field(default=None, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ParameterError("times and values must be 1-d arrays of equal length")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ParameterError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ParameterError("path values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def subsample(self, every: int, offset: int = 0) -> "GaussianPath":
        """Coarse grid made of every ``every``-th fine grid point."""
        return GaussianPath(self.times[offset::every], self.values[offset::every], self.params)

    # -- serialization ---------------------------------------------------

    def to_csv(self, dest) -> None:
        lines = ["time,value"]
        lines += [f"{float(t)!r},{float(v)!r}" for t, v in zip(self.times, self.values)]
        text = "\n".join(lines) + "\n"
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            Path(dest).write_text(text)

    @classmethod
    def from_csv(cls, src, params=None) -> "GaussianPath":
        text = src.read() if hasattr(src, "read") else Path(src).read_text()
        rows = text.strip().splitlines()
        if not rows or rows[0].strip() != "time,value":
            raise ParameterError("path CSV must start with a 'time,value' header")
        data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]], dtype=float)
        data = data.reshape(-1, 2)
        return cls(data[:, 0], data[:, 1], params)

    _MAGIC = b"RVPATH01"

    def to_bytes(self) -> bytes:
        """Binary block: magic, header length, JSON params header, then
        little-endian float64 times followed by values."""
        header = json.dumps(_params_to_dict(self.params), sort_keys=True).encode()
        buf = io.BytesIO()
        buf.write(self._MAGIC)
        buf.write(struct.pack("<IQ", len(header), len(self.values)))
        buf.write(header)
        buf.write(self.times.astype("<f8").tobytes())
        buf.write(self.values.astype("<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GaussianPath":
        if blob[:8] != cls._MAGIC:
            raise ParameterError("not a path binary block")
        hlen, n = struct.unpack("<IQ", blob[8:20])
        pos = 20
        params = _params_from_dict(json.loads(blob[pos:pos + hlen]))
        pos += hlen
        times = np.frombuffer(blob, dtype="<f8", count=n, offset=pos)
        values = np.frombuffer(blob, dtype="<f8", count=n, offset=pos + 8 * n)
        return cls(times.astype(float), values.astype(float), params)


def _params_to_dict(params) -> dict | None:
    if params is None:
        return None
    kind = "fou" if isinstance(params, FouParams) else "fbm"
    return {"kind": kind, **asdict(params)}


def _params_from_dict(d):
    if d is None:
        return None
    d = dict(d)
    kind = d.pop("kind")
    if kind == "fbm":
        return FbmParams(**d)
    d["fbm"] = FbmParams(**d["fbm"])
    return FouParams(**d)


# -- simulation -------------------------------------------------------------


@lru_cache(maxsize=8)
def _circulant_sqrt_eigs(n_incr: int, hurst: float) -> np.ndarray:
    """sqrt(eigenvalues / size) of the smallest valid circulant embedding of
    the unit-step fGn covariance of length ``n_incr``."""
    m = 1 << max(1, math.ceil(math.log2(n_incr)))
    for _ in range(_MAX_EMBED_DOUBLINGS + 1):
        k = np.arange(m + 1, dtype=float)
        h2 = 2 * hurst
        gamma = 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)
        row = np.concatenate([gamma, gamma[-2:0:-1]])
        lam = np.fft.fft(row).real
        if lam.min() >= -1e-10 * lam.max():
            lam = np.clip(lam, 0.0, None)
            out = np.sqrt(lam / len(lam))
            out.flags.writeable = False
            return out
        m *= 2
    raise EmbeddingError(
        f"circulant embedding not nonnegative definite for H={hurst}, n={n_incr}"
    )


def fgn(n_incr: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-step fractional Gaussian noise of length ``n_incr``."""
    root = _circulant_sqrt_eigs(int(n_incr), float(hurst))
    z = rng.standard_normal(len(root)) + 1j * rng.standard_normal(len(root))
    return np.fft.fft(root * z).real[:n_incr]


def fbm_simulate(params: FbmParams, path_index: int = 0) -> GaussianPath:
    """Exact fBM sample on ``t_k = k*dt``, ``k = 0..n_points-1``, with W(0) = 0."""
    rng = path_rng(params.seed, path_index)
    n = params.n_points
    incr = fgn(n - 1, params.hurst, rng) * params.dt**params.hurst
    values = np.empty(n)
    values[0] = 0.0
    np.cumsum(incr, out=values[1:])
    return GaussianPath(np.arange(n) * params.dt, values, params)


def fbm_batch(params: FbmParams, n_paths: int, start_index: int = 0) -> np.ndarray:
    """Paths ``start_index .. start_index + n_paths - 1`` as rows of an array.

    Row ``i`` equals ``fbm_simulate(params, start_index + i).values``; the
    FFTs are batched.
    """
    n = params.n_points
    root = _circulant_sqrt_eigs(n - 1, float(params.hurst))
    z = np.empty((n_paths, len(root)), dtype=complex)
    for i in range(n_paths):
        rng = path_rng(params.seed, start_index + i)
        z[i] = rng.standard_normal(len(root)) + 1j * rng.standard_normal(len(root))
    incr = np.fft.fft(root * z, axis=1).real[:, : n - 1] * params.dt**params.hurst
    out = np.zeros((n_paths, n))
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return out


def fou_from_fbm(w: np.ndarray, params: FouParams) -> np.ndarray:
    """Run the Euler recursion on a given fBM path ``w`` (same grid)."""
    nu, alpha, m, x0 = params.nu, params.alpha, params.mean_level, params.x0
    if alpha == 0:
        return x0 + nu * w
    a = alpha * params.fbm.dt
    drive = nu * np.diff(w) + a * m
    rest, _ = lfilter([1.0], [1.0, -(1.0 - a)], drive, zi=[(1.0 - a) * x0])
    out = np.empty(len(w))
    out[0] = x0
    out[1:] = rest
    return out


def fou_simulate(params: FouParams, path_index: int = 0) -> GaussianPath:
    w = fbm_simulate(params.fbm, path_index)
    return GaussianPath(w.times, fou_from_fbm(w.values, params), params)


def rfsv_params(
    n_days: int = 2000,
    steps_per_day: int = 1440,
    hurst: float = 0.14,
    nu: float = 0.3,
    alpha: float = 5e-4,
    mean_level: float = -5.0,
    x0: float | None = None,
    seed: int = 0,
) -> FouParams:
    """Log-volatility parameters of the simulation study on a nested grid
    (``steps_per_day`` fine steps per daily observation)."""
    fb = FbmParams(hurst, n_days * steps_per_day + 1, 1.0 / steps_per_day, seed)
    return FouParams(fb, nu, alpha, mean_level, mean_level if x0 is None else x0)


# -- covariance engine ------------------------------------------------------


def _check_cov_args(hurst, nu, alpha, lag):
    if not 0 < hurst < 1:
        raise ParameterError(f"hurst must lie in (0, 1), got {hurst}")
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if not lag >= 0:
        raise ParameterError(f"lag must be nonnegative, got {lag}")


def _quad(f, a, b, points=None):
    pts = None if points is None else [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=1000, points=pts)[:2]
    return val, err


def _spectral_total(hurst: float) -> float:
    """int_0^inf y^(1-2H) / (1+y^2) dy."""
    return math.pi / (2 * math.sin(math.pi * hurst))


_ROT = cmath.exp(0.25j * math.pi)


def _rotated_integral(hurst: float, omega: float, kind: str) -> tuple[float, float]:
    """Spectral integrals over y in [0, inf) along the ray y = t exp(i pi/4).

    kind 'cos':        int cos(omega y) y^(1-2H) / (1+y^2) dy
    kind 'one_minus':  int (1 - cos(omega y)) y^(1-2H) / (1+y^2) dy

    Rotating the ray by pi/4 crosses no pole (the only one in the upper half
    plane is at y = i) and turns the oscillating factor exp(i omega y) into
    one decaying like exp(-omega t / sqrt 2). For |w| < 1, 1 - exp(i w) is
    evaluated as -2i exp(i w/2) sin(w/2) to avoid cancellation. On [0, 1]
    the substitution t = u^c, c = 1/(2-2H), absorbs the t^(1-2H) endpoint
    factor.
    """
    s = 1.0 - 2.0 * hurst
    c = 1.0 / (2.0 - 2.0 * hurst)
    rot_s = _ROT**s

    def smooth(t):
        # integrand with the t^s factor removed
        z = t * _ROT
        base = rot_s * _ROT / (1.0 + z * z)
        if kind == "cos":
            return (cmath.exp(1j * omega * z) * base).real
        w = omega * z
        if abs(w) < 1.0:
            return (-2j * cmath.exp(0.5j * w) * cmath.sin(0.5 * w) * base).real
        return ((1.0 - cmath.exp(1j * w)) * base).real

    head_pts = [(k / omega) ** (1.0 / c) for k in (1.0, 10.0, 40.0)] if omega > 1 else None
    head, e1 = _quad(lambda u: c * smooth(u**c), 0.0, 1.0, head_pts)
    full = lambda t: t**s * smooth(t)
    far = 60.0 / omega
    if kind == "cos" and far <= 1.0:
        return head, e1
    stop = far if kind == "cos" else max(far, 10.0)
    # one segment per decade: long ranges defeat a single adaptive pass
    edges = np.geomspace(1.0, stop, max(2, int(math.ceil(math.log10(stop))) + 1))
    total, err = head, e1
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _quad(full, a, b)
        total, err = total + v, err + e
    if kind != "cos":
        # past stop exp(i w) is below 1e-18; integrate z^s / (1 + z^2) termwise in 1/t^2
        k = np.arange(12)
        terms = -(1j ** (k + 1)) * stop ** (s - 1 - 2 * k) / (1 + 2 * k - s)
        total += (rot_s * _ROT * terms.sum()).real
    return total, err


def _spectral_prefactor(hurst, nu, alpha):
    k = nu**2 * special.gamma(2 * hurst + 1) * math.sin(math.pi * hurst) / (2 * math.pi)
    # both halves of the even integrand, rescaled by x = alpha*y
    return 2 * k * alpha ** (-2 * hurst)


def _checked(value, err, what):
    if not np.isfinite(value) or err > QUAD_RTOL * max(abs(value), 1e-300):
        raise QuadratureError(
            f"{what}: estimated error {err:.3g} above tolerance for value {value:.6g}",
            value=value,
            error=err,
        )
    return value


def fou_variance(hurst: float, nu: float, alpha: float) -> float:
    """Stationary variance nu^2 Gamma(2H+1) / (2 alpha^(2H))."""
    _check_cov_args(hurst, nu, alpha, 0.0)
    return 0.5 * nu**2 * special.gamma(2 * hurst + 1) * alpha ** (-2 * hurst)


def fou_autocov(hurst: float, nu: float, alpha: float, lag: float) -> float:
    """Stationary fOU autocovariance at ``lag`` from the spectral integral."""
    _check_cov_args(hurst, nu, alpha, lag)
    if lag == 0:
        return fou_variance(hurst, nu, alpha)
    integral, err = _rotated_integral(hurst, alpha * lag, "cos")
    pre = _spectral_prefactor(hurst, nu, alpha)
    # relative to the variance scale: near-zero covariances at huge lags are fine
    scale = max(abs(integral), 1e-3 * _spectral_total(hurst))
    _checked(scale, err, f"fou_autocov(H={hurst}, alpha={alpha}, lag={lag})")
    return pre * integral


def fou_variogram(hurst: float, nu: float, alpha: float, lag: float) -> float:
    """E[(X_{t+lag} - X_t)^2]; reduces to nu^2 lag^(2H) when alpha = 0."""
    if alpha == 0:
        if not lag >= 0:
            raise ParameterError("lag must be nonnegative")
        return nu**2 * lag ** (2 * hurst)
    _check_cov_args(hurst, nu, alpha, lag)
    if lag == 0:
        return 0.0
    integral, err = _rotated_integral(hurst, alpha * lag, "one_minus")
    # floor far below any resolvable variogram: quad's error estimate bottoms out near 1e-22
    scale = max(abs(integral), 1e-12 * _spectral_total(hurst))
    _checked(scale, err, f"fou_variogram(H={hurst}, alpha={alpha}, lag={lag})")
    return 2 * _spectral_prefactor(hurst, nu, alpha) * integral


def fou_autocov_closed_form(hurst: float, nu: float, alpha: float, lag: float) -> float:
    """Closed-form fOU autocovariance, valid for H > 1/2 only."""
    _check_cov_args(hurst, nu, alpha, lag)
    if hurst <= 0.5:
        raise ParameterError("closed-form fOU autocovariance requires H > 1/2")
    s = 2 * hurst - 1
    x = alpha * lag
    pref = hurst * (2 * hurst - 1) * nu**2 / (2 * alpha ** (2 * hurst))
    # e^-x int_0^x e^u u^(s-1) du and e^x int_x^inf e^-u u^(s-1) du, in overflow-free form
    lower = x**s / s * special.hyp1f1(1.0, s + 1, -x) if x > 0 else 0.0
    upper = special.hyperu(1 - s, 1 - s, x) if x > 0 else special.gamma(s)
    return pref * (math.exp(-x) * special.gamma(s) + lower + upper)


def lognormal_vol_cov(
    hurst: float,
    nu: float,
    alpha: float,
    mean_level: float,
    lag: float,
    *,
    small_alpha: bool = False,
    centered: bool = False,
) -> float:
    """E[sigma_{t+lag} sigma_t] for sigma = exp(X) with X a stationary fOU.

    ``small_alpha`` switches to exp(2m + 2Var) * exp(-nu^2 lag^(2H) / 2), the
    approximation valid when alpha is small. ``centered`` subtracts E[sigma]^2.
    """
    var = fou_variance(hurst, nu, alpha)
    if small_alpha:
        expo = 2 * mean_level + 2 * var - 0.5 * nu**2 * lag ** (2 * hurst)
    else:
        expo = 2 * mean_level + var + fou_autocov(hurst, nu, alpha, lag)
    if expo > 700:
        raise VolOverflowError(f"log second moment {expo:.1f} overflows", exponent=expo)
    second = math.exp(expo)
    if centered:
        return second - math.exp(2 * mean_level + var)
    return second
