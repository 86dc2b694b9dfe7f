"""Hawkes order-flow simulation and the roughness of its coarse-grained activity.

Intensity ``lambda_t = mu + sum_{J_i < t} phi(t - J_i)``. Every kernel is
handled as a finite sum of exponentials ``phi(t) ~ sum_k c_k exp(-s_k t)``
so the intensity is a fixed-size state vector decaying between events and
Ogata thinning costs O(K) per candidate point, independently of the
history length. The power-law kernel ``a (t + t0)^(-beta)`` is expanded
through its Gamma-integral representation

    (t + t0)^(-beta) = 1/Gamma(beta) int_R exp(beta x - e^x (t + t0)) dx,

discretized by the trapezoid rule on a uniform grid in ``x``, which
converges geometrically in the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numba
import numpy as np
from scipy import special

from .errors import EventBudgetError, InstabilityError, ParameterError, TooFewBinsError
from .fracproc import path_rng
from .scaling import DEFAULT_DELTA_GRID, DEFAULT_Q_GRID, fit_from_m, fit_scaling, structure_function
from .series import VolSeries

MIN_BINS = 100
COUNT_FLOOR = 0.5
_CHUNK = 1 << 18


@dataclass(frozen=True)
class ZeroKernel:
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def l1_norm(self) -> float:
        return 0.0

    def exponentials(self, horizon: float):
        return np.zeros(0), np.zeros(0)


@dataclass(frozen=True)
class ExponentialKernel:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a >= 0 and self.b > 0):
            raise ParameterError("exponential kernel needs a >= 0 and b > 0")

    def __call__(self, t):
        return self.a * np.exp(-self.b * np.asarray(t, dtype=float))

    def l1_norm(self) -> float:
        return self.a / self.b

    def exponentials(self, horizon: float):
        return np.array([self.a]), np.array([self.b])


@dataclass(frozen=True)
class PowerLawKernel:
    a: float
    beta: float
    t0: float = 1e-3

    def __post_init__(self):
        if not (self.a >= 0 and self.beta > 1 and self.t0 > 0):
            raise ParameterError("power-law kernel needs a >= 0, beta > 1 and t0 > 0")

    @classmethod
    def with_norm(cls, norm: float, beta: float, t0: float = 1e-3) -> "PowerLawKernel":
        """Kernel with the given L1 norm."""
        return cls(norm * (beta - 1) * t0 ** (beta - 1), beta, t0)

    def __call__(self, t):
        return self.a * (np.asarray(t, dtype=float) + self.t0) ** (-self.beta)

    def l1_norm(self) -> float:
        return self.a * self.t0 ** (1 - self.beta) / (self.beta - 1)

    def exponentials(self, horizon: float, step: float = 0.5):
        """Rates and amplitudes of the trapezoid expansion.

        Rates run from well below 1/horizon (the kernel is then flat over the
        whole run) up to 50/t0 (the term is negligible at t = 0).
        """
        lo = math.log(1e-8 ** (1 / self.beta) / (horizon + self.t0)) - 2
        hi = math.log(50 / self.t0)
        x = np.arange(lo, hi + step, step)
        s = np.exp(x)
        c = self.a * step * np.exp(self.beta * x - s * self.t0) / special.gamma(self.beta)
        keep = c > 0
        return c[keep], s[keep]

    def expansion_error(self, horizon: float) -> float:
        """Maximum relative error of the exponential expansion on [0, horizon]."""
        c, s = self.exponentials(horizon)
        t = np.concatenate([[0.0], np.logspace(math.log10(self.t0) - 3, math.log10(horizon), 400)])
        approx = np.exp(-np.outer(t, s)) @ c
        return float(np.max(np.abs(approx / self(t) - 1)))


Kernel = Union[ZeroKernel, ExponentialKernel, PowerLawKernel]


@dataclass(frozen=True)
class HawkesParams:
    mu: float
    kernel: Kernel
    horizon: float
    seed: int = 0
    max_events: int = 20_000_000

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError("baseline intensity mu must be positive")
        if not self.horizon > 0:
            raise ParameterError("horizon must be positive")
        norm = self.kernel.l1_norm()
        # margin for rounding in norms built to equal one
        if not norm < 1 - 1e-12:
            raise InstabilityError(f"kernel L1 norm {norm:.6g} >= 1: the process is explosive", l1_norm=norm)

    @property
    def l1_norm(self) -> float:
        return self.kernel.l1_norm()

    def stationary_rate(self) -> float:
        return self.mu / (1 - self.l1_norm)


@dataclass
class EventStream:
    jump_times: np.ndarray
    params: HawkesParams | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.jump_times, dtype=float)
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ParameterError("jump times must be strictly increasing")
        if len(t) and t[0] < 0:
            raise ParameterError("jump times must be nonnegative")
        self.jump_times = t

    def __len__(self):
        return len(self.jump_times)

    @property
    def horizon(self) -> float:
        if self.params is not None:
            return self.params.horizon
        return float(self.meta.get("horizon", self.jump_times[-1] if len(self) else 0.0))

    def to_csv(self, dest=None) -> str:
        text = "time\n" + "".join(f"{float(t)!r}\n" for t in self.jump_times)
        if dest is not None:
            if hasattr(dest, "write"):
                dest.write(text)
            else:
                Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, src, params: HawkesParams | None = None) -> "EventStream":
        text = src.read() if hasattr(src, "read") else Path(src).read_text()
        rows = text.strip().splitlines()
        if not rows or rows[0].strip() != "time":
            raise ParameterError("event CSV must start with a 'time' header")
        return cls(np.array([float(r) for r in rows[1:]]), params)


@numba.njit(cache=True)
def _thin(mu, c, s, horizon, expo, unif, ie, iu, state, t, out, n_out):
    """Advance Ogata thinning from positions ``ie``/``iu`` of the random
    number chunks. Between events the intensity only decays, so its current
    value bounds it until the next candidate point.

    Status: 0 chunk exhausted, 1 horizon reached, 2 output buffer full.
    """
    k_terms = len(c)
    while ie < len(expo) and iu < len(unif):
        if n_out >= len(out):
            return t, n_out, ie, iu, 2
        lam_bar = mu
        for k in range(k_terms):
            lam_bar += state[k]
        wait = expo[ie] / lam_bar
        ie += 1
        t_new = t + wait
        if t_new > horizon:
            return t_new, n_out, ie, iu, 1
        lam = mu
        for k in range(k_terms):
            state[k] *= math.exp(-s[k] * wait)
            lam += state[k]
        t = t_new
        if unif[iu] * lam_bar <= lam:
            for k in range(k_terms):
                state[k] += c[k]
            out[n_out] = t
            n_out += 1
        iu += 1
    return t, n_out, ie, iu, 0


def hawkes_simulate(params: HawkesParams, path_index: int = 0) -> EventStream:
    """Ogata thinning on [0, horizon] started from an empty history."""
    c, s = params.kernel.exponentials(params.horizon)
    c = np.ascontiguousarray(c, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    rng = path_rng(params.seed, path_index)
    state = np.zeros(len(c))
    expect = params.stationary_rate() * params.horizon
    cap = int(min(params.max_events, max(1024, 2 * expect + 10 * math.sqrt(expect) + 1024)))
    out = np.empty(cap)
    t, n, ie, iu = 0.0, 0, _CHUNK, _CHUNK
    while True:
        if ie >= _CHUNK or iu >= _CHUNK:
            expo = rng.standard_exponential(_CHUNK)
            unif = rng.random(_CHUNK)
            ie, iu = 0, 0
        t, n, ie, iu, status = _thin(params.mu, c, s, params.horizon, expo, unif, ie, iu, state, t, out, n)
        if status == 1:
            break
        if status == 2:
            if len(out) >= params.max_events:
                raise EventBudgetError(
                    f"more than {params.max_events} events before t={t:.6g} of {params.horizon}",
                    max_events=params.max_events, time_reached=t,
                )
            bigger = np.empty(min(params.max_events, 2 * len(out)))
            bigger[:n] = out[:n]
            out = bigger
    meta = {"n_exponentials": len(c)}
    if isinstance(params.kernel, PowerLawKernel):
        meta["kernel_rel_error"] = params.kernel.expansion_error(params.horizon)
    return EventStream(out[:n].copy(), params, meta)


def _offspring_delays(kernel: Kernel, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(kernel, ExponentialKernel):
        return rng.standard_exponential(n) / kernel.b
    if isinstance(kernel, PowerLawKernel):
        # Lomax law with density proportional to (t + t0)^(-beta)
        u = 1.0 - rng.random(n)
        return kernel.t0 * (u ** (-1.0 / (kernel.beta - 1)) - 1.0)
    return np.zeros(0)


def hawkes_simulate_cluster(params: HawkesParams, path_index: int = 0) -> EventStream:
    """Same law through the branching representation: Poisson immigrants,
    each event having Poisson(||phi||_1) children at kernel-distributed delays.

    Uses the exact kernel (no exponential expansion), so it serves as an
    independent check of the thinning simulator.
    """
    rng = path_rng(params.seed, path_index)
    norm = params.l1_norm
    gen = np.sort(rng.uniform(0.0, params.horizon, rng.poisson(params.mu * params.horizon)))
    events = [gen]
    total = len(gen)
    while True:
        if total > params.max_events:
            raise EventBudgetError(f"more than {params.max_events} events", max_events=params.max_events)
        if not len(gen) or norm == 0:
            break
        kids = rng.poisson(norm, len(gen))
        parents = np.repeat(gen, kids)
        gen = parents + _offspring_delays(params.kernel, len(parents), rng)
        gen = gen[gen <= params.horizon]
        total += len(gen)
        events.append(gen)
    return EventStream(np.sort(np.concatenate(events)), params)


def bin_counts(stream: EventStream, bin_width: float) -> np.ndarray:
    if not bin_width > 0:
        raise ParameterError("bin width must be positive")
    n_bins = int(math.floor(stream.horizon / bin_width + 1e-9))
    if n_bins < MIN_BINS:
        raise TooFewBinsError(
            f"horizon {stream.horizon:g} with bin {bin_width:g} gives {n_bins} bins, need {MIN_BINS}",
            n_bins=n_bins, required=MIN_BINS,
        )
    return np.histogram(stream.jump_times, bins=n_bins, range=(0.0, n_bins * bin_width))[0].astype(float)


def coarse_grain_to_vol(stream: EventStream, bin_width: float) -> VolSeries:
    """Per-bin event counts as a variance proxy; empty bins are floored at 0.5."""
    counts = bin_counts(stream, bin_width)
    empty = int(np.sum(counts == 0))
    return VolSeries.from_values(np.maximum(counts, COUNT_FLOOR), units="var", label="hawkes-counts",
                                 bin_width=bin_width, floored_bins=empty)


def integrated_hurst(stream: EventStream, bin_width: float, q_grid=DEFAULT_Q_GRID,
                     delta_grid=DEFAULT_DELTA_GRID) -> float:
    """Structure-function H of the compensated cumulative count process.

    A Poisson stream gives a Brownian-like integrated process, H near 1/2.
    """
    counts = bin_counts(stream, bin_width)
    cum = np.cumsum(counts)
    cum = cum - np.arange(1, len(cum) + 1) * cum[-1] / len(cum)
    m = structure_function(cum, q_grid, delta_grid)
    return fit_from_m(m, q_grid, delta_grid, len(cum)).hurst_hat


def log_count_hurst(stream: EventStream, bin_width: float) -> float:
    """Roughness of the coarse-grained activity: fit_scaling on log counts."""
    return fit_scaling(coarse_grain_to_vol(stream, bin_width)).hurst_hat


def poisson_null_band(rate: float, horizon: float, bin_width: float, n_runs: int = 50,
                      seed: int = 0, level: float = 0.95) -> tuple[float, float]:
    """Central Monte Carlo band of integrated_hurst for Poisson streams of the given rate."""
    vals = []
    for i in range(n_runs):
        rng = path_rng(seed, i)
        times = np.sort(rng.uniform(0.0, horizon, rng.poisson(rate * horizon)))
        vals.append(integrated_hurst(EventStream(times, meta={"horizon": horizon}), bin_width))
    lo, hi = np.quantile(vals, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)
