"""Rough volatility toolkit: fractional process simulation, roughness
estimation, volatility forecasting, long-memory diagnostics and Hawkes
order-flow simulation."""

__version__ = "0.1.0"

from .errors import RoughVolError
from .series import VolSeries

__all__ = ["RoughVolError", "VolSeries", "__version__"]
