"""CUSUM statistics, change-point energies and the high-energy predicate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PiecewiseSignal, PrefixSums, as_triad, piecewise_signal_values

__all__ = [
    "EnergyProfile",
    "cusum",
    "cusum_many",
    "energy_at",
    "energy_profile",
    "e_min",
    "scale_log",
    "psi_q",
    "is_high_energy",
]


def cusum(p: PrefixSums, t) -> float:
    """Signed CUSUM statistic on the triad ``t = (t1, t2, t3)``.

    The mean of ``Y`` on ``[t2, t3)`` minus its mean on ``[t1, t2)``,
    weighted by ``sqrt((t2 - t1)(t3 - t2) / (t3 - t1))``.
    """
    t = as_triad(t).check(p.n)
    return float(cusum_many(p, t.t1, t.t2, t.t3))


def cusum_many(p: PrefixSums, t1, t2, t3) -> np.ndarray:
    """Vectorised :func:`cusum` over integer arrays of triad coordinates.

    No validation is done; callers guarantee ``1 <= t1 < t2 < t3 <= n + 1``.
    """
    t1 = np.asarray(t1)
    t2 = np.asarray(t2)
    t3 = np.asarray(t3)
    d1 = t2 - t1
    d2 = t3 - t2
    cs = p.cs
    right = (cs[t3 - 1] - cs[t2 - 1]) / d2
    left = (cs[t2 - 1] - cs[t1 - 1]) / d1
    return (right - left) * np.sqrt(d1 * d2 / (d1 + d2))


def energy_at(theta_prefix: PrefixSums, t) -> float:
    """Energy of a mean vector on a triad: the absolute population CUSUM."""
    return abs(cusum(theta_prefix, t))


@dataclass(frozen=True)
class EnergyProfile:
    """Per change-point energies, change-point lengths and heights."""

    energies: np.ndarray
    lengths: np.ndarray
    heights: np.ndarray

    def __len__(self):
        return self.energies.size


def energy_profile(sig: PiecewiseSignal) -> EnergyProfile:
    """Energies ``E_k``, lengths ``l_k`` and heights of every change-point.

    ``E_k = |Delta_k| sqrt(d_l d_r / (d_l + d_r))`` where ``d_l``, ``d_r`` are
    the lengths of the two segments adjacent to ``tau_k``; ``l_k`` is the
    smaller of them.  A signal without change-points gives empty arrays.
    """
    seg = np.diff(sig.taus.bounds()).astype(float)
    left, right = seg[:-1], seg[1:]
    heights = sig.heights
    energies = np.abs(heights) * np.sqrt(left * right / (left + right))
    lengths = np.minimum(left, right).astype(np.int64)
    return EnergyProfile(energies, lengths, heights)


def e_min(sig: PiecewiseSignal) -> float:
    """Smallest absolute height times the square root of the shortest segment."""
    if sig.K == 0:
        raise ValueError("E_min is undefined for a signal without change-points")
    seg = np.diff(sig.taus.bounds())
    return float(np.min(np.abs(sig.heights)) * math.sqrt(seg.min()))


def scale_log(n, d1, d2):
    """``log(n (d1 + d2) / (d1 d2))``, the scale term of the multiscale bounds."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    return np.log(n * (d1 + d2) / (d1 * d2))


def psi_q(n: int, d1: int, d2: int, q: float) -> float:
    """``sqrt(2 log(n (d1 + d2) / (d1 d2)) + q)``."""
    if d1 < 1 or d2 < 1:
        raise ValueError(f"segment lengths must be >= 1, got ({d1}, {d2})")
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    return math.sqrt(2.0 * float(scale_log(n, d1, d2)) + q)


def is_high_energy(sig: PiecewiseSignal, k: int, kappa: float, q: float) -> bool:
    """Whether ``tau_k`` is a ``(kappa, q)``-high-energy change-point.

    True iff ``E_k > kappa * psi_q(n, tau_k - tau_{k-1}, tau_{k+1} - tau_k)``.
    """
    if not 1 <= k <= sig.K:
        raise ValueError(f"k must be in [1, {sig.K}], got {k}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    b = sig.taus.bounds()
    d1 = int(b[k] - b[k - 1])
    d2 = int(b[k + 1] - b[k])
    energy = energy_profile(sig).energies[k - 1]
    return bool(energy > kappa * psi_q(sig.n, d1, d2, q))


def signal_prefix(sig: PiecewiseSignal) -> PrefixSums:
    """Prefix sums of the noiseless mean vector."""
    return PrefixSums(piecewise_signal_values(sig, sig.n))
