"""Distances between change-point vectors and per-run property checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChangePointVector, PiecewiseSignal
from .stats import is_high_energy

__all__ = [
    "DetecReport",
    "d_h1_point",
    "d_screen",
    "d_hausdorff",
    "d_wasserstein",
    "check_nosp",
    "detec_bound",
    "check_detec",
]


def _arr(taus) -> np.ndarray:
    if isinstance(taus, ChangePointVector):
        return taus.taus
    return np.asarray(list(taus), dtype=np.int64)


def d_h1_point(taus, target: int):
    """Distance from ``target`` to its closest element of ``taus``.

    Returns ``math.inf`` when ``taus`` is empty.
    """
    t = _arr(taus)
    if t.size == 0:
        return math.inf
    return int(np.min(np.abs(t - int(target))))


def _nearest(t: np.ndarray, targets: np.ndarray) -> np.ndarray:
    # distance from each target to the sorted vector t
    i = np.searchsorted(t, targets)
    left = np.abs(targets - t[np.clip(i - 1, 0, t.size - 1)])
    right = np.abs(t[np.clip(i, 0, t.size - 1)] - targets)
    return np.minimum(left, right)


def d_screen(a, b):
    """One-sided distance ``max_j min_i |a_i - b_j|``.

    Zero when ``b`` is empty, infinite when only ``a`` is.
    """
    ta, tb = np.sort(_arr(a)), _arr(b)
    if tb.size == 0:
        return 0
    if ta.size == 0:
        return math.inf
    return int(np.max(_nearest(ta, tb)))


def d_hausdorff(a, b):
    """Symmetric Hausdorff distance; ``0`` for two empty vectors."""
    ta, tb = _arr(a), _arr(b)
    if ta.size == 0 and tb.size == 0:
        return 0
    if ta.size == 0 or tb.size == 0:
        return math.inf
    return max(d_screen(ta, tb), d_screen(tb, ta))


def d_wasserstein(a, b) -> int:
    """``sum_j |a_j - b_j|`` of the sorted vectors, which must have equal length."""
    ta, tb = np.sort(_arr(a)), np.sort(_arr(b))
    if ta.size != tb.size:
        raise ValueError(f"lengths differ ({ta.size} vs {tb.size})")
    return int(np.sum(np.abs(ta - tb)))


def check_nosp(est, truth) -> bool:
    """No spurious change-point: at most one estimate per bin of ``truth``.

    Bins split ``[2, n]`` at the midpoints between consecutive true
    change-points; a midpoint belongs to the bin on its left.  Membership is
    decided on doubled integers, so half-integer midpoints are exact.
    """
    t = np.sort(_arr(truth))
    e = _arr(est)
    if t.size == 0:
        return e.size == 0
    bins = np.searchsorted(t[:-1] + t[1:], 2 * e, side="left")
    return bool(np.all(np.bincount(bins, minlength=t.size) <= 1))


def detec_bound(sig: PiecewiseSignal, k: int, q: float, c: float) -> float:
    """Allowed distance ``min(half gaps, c (log(1 v n Delta^2) + q) / Delta^2)``."""
    b = sig.taus.bounds()
    delta2 = float(sig.heights[k - 1]) ** 2
    rate = c * (math.log(max(1.0, sig.n * delta2)) + q) / delta2
    return min((b[k + 1] - b[k]) / 2, (b[k] - b[k - 1]) / 2, rate)


@dataclass(frozen=True)
class DetecReport:
    """Per true change-point detection outcome.

    Only high-energy change-points are required to be detected; ``passed``
    is true when all of them are.
    """

    high_energy: np.ndarray
    detected: np.ndarray
    distance: np.ndarray
    bound: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.detected[self.high_energy]))

    @property
    def n_high_energy(self) -> int:
        return int(np.sum(self.high_energy))


def check_detec(est, sig: PiecewiseSignal, kappa: float, q: float, c: float) -> DetecReport:
    """Score ``est`` against every change-point of ``sig``.

    Parameters
    ----------
    est : ChangePointVector or sequence of int
        Estimated change-points.
    sig : PiecewiseSignal
        Ground truth with at least one change-point.
    kappa, q : float
        High-energy thresholds.
    c : float
        Constant of the localisation term of the bound.
    """
    if sig.K == 0:
        raise ValueError("the signal has no change-point")
    e = np.sort(_arr(est))
    K = sig.K
    high = np.array([is_high_energy(sig, k, kappa, q) for k in range(1, K + 1)], dtype=bool)
    if e.size:
        dist = _nearest(e, sig.taus.taus).astype(float)
    else:
        dist = np.full(K, math.inf)
    bound = np.array([detec_bound(sig, k, q, c) for k in range(1, K + 1)])
    return DetecReport(high, dist <= bound, dist, bound)
