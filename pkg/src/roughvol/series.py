"""Daily volatility-proxy series."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DuplicateDateError, NonPositiveValueError, ParameterError

UNITS = ("vol", "var", "logvar")


@dataclass(frozen=True, eq=False)
class VolSeries:
    """Regularly spaced volatility proxy.

    ``dates`` are either ``datetime64[D]`` values or integer day indices.
    ``values`` are in the units given by ``units``: volatility, variance or
    log-variance. Lags are always counted in observations (trading days),
    so calendar gaps do not break the series; they are only counted in
    :attr:`n_gaps`.
    """

    dates: np.ndarray
    values: np.ndarray
    units: str = "var"
    label: str = ""
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        dates = np.asarray(self.dates)
        if dates.dtype.kind == "M":
            dates = dates.astype("datetime64[D]")
        elif dates.dtype.kind in "iu":
            dates = dates.astype(np.int64)
        else:
            raise ParameterError(f"dates must be datetime64 or integer, got {dates.dtype}")
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or values.ndim != 1:
            raise ParameterError("dates and values must be 1-d arrays of equal length")
        if self.units not in UNITS:
            raise ParameterError(f"units must be one of {UNITS}, got {self.units!r}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("values must be finite")
        if self.units in ("vol", "var") and np.any(values <= 0):
            bad = np.flatnonzero(values <= 0)
            raise NonPositiveValueError(
                f"{len(bad)} nonpositive values in a {self.units} series", indices=bad[:20].tolist()
            )
        if len(dates) > 1:
            steps = np.diff(dates.view(np.int64))
            if np.any(steps == 0):
                dup = np.unique(dates[1:][steps == 0])
                raise DuplicateDateError(
                    f"duplicate dates: {', '.join(str(d) for d in dup[:20])}",
                    duplicates=[str(d) for d in dup],
                )
            if np.any(steps < 0):
                raise ParameterError("dates must be ascending")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values, units: str = "var", label: str = "", **meta) -> "VolSeries":
        values = np.asarray(values, dtype=float)
        return cls(np.arange(len(values), dtype=np.int64), values, units, label, dict(meta))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VolSeries):
            return NotImplemented
        return (
            self.units == other.units
            and self.label == other.label
            and self.dates.dtype == other.dates.dtype
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def log_vol(self) -> np.ndarray:
        """log sigma for each observation."""
        if self.units == "vol":
            return np.log(self.values)
        if self.units == "var":
            return 0.5 * np.log(self.values)
        return 0.5 * self.values

    def log_var(self) -> np.ndarray:
        return 2.0 * self.log_vol()

    def variance(self) -> np.ndarray:
        if self.units == "var":
            return self.values.copy()
        if self.units == "vol":
            return self.values**2
        return np.exp(self.values)

    def vol(self) -> np.ndarray:
        return np.exp(self.log_vol())

    @property
    def n_gaps(self) -> int:
        """Number of missing observation days between consecutive dates."""
        if len(self) < 2:
            return 0
        if self.dates.dtype.kind == "M":
            between = np.busday_count(self.dates[:-1], self.dates[1:]) - 1
        else:
            between = np.diff(self.dates.view(np.int64)) - 1
        return int(np.sum(np.clip(between, 0, None) > 0))

    def slice(self, start: int | None = None, stop: int | None = None) -> "VolSeries":
        return VolSeries(self.dates[start:stop], self.values[start:stop], self.units, self.label)

    def with_values(self, values, units: str) -> "VolSeries":
        return VolSeries(self.dates, values, units, self.label)


def as_log_vol(series) -> np.ndarray:
    """Log-volatility array from a :class:`VolSeries` or a raw log-vol array."""
    if isinstance(series, VolSeries):
        return series.log_vol()
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ParameterError("expected a 1-d series")
    if not np.all(np.isfinite(x)):
        raise ParameterError("series contains non-finite values")
    return x
