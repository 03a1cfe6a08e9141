"""Offline change-point detection with multiscale penalties and CUSUM post-processing."""

from .core import ChangePointVector, PiecewiseSignal, PrefixSums, TimeSeries, Triad

__version__ = "0.1.0"

__all__ = ["ChangePointVector", "PiecewiseSignal", "PrefixSums", "TimeSeries", "Triad"]
