"""At most one change-point: multiscale penalty, test, estimator and interval.

All quantities reduce to the CUSUM at the triads ``(1, tau, n + 1)``:
``||(Pi_tau - Pi_0) Y||^2 = C(Y, (1, tau, n + 1))^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._config import defaults
from .core import PrefixSums, as_prefix
from .stats import cusum_many

__all__ = [
    "SingleTestOutcome",
    "SingleCIReport",
    "pen1",
    "cr1",
    "estimate_single",
    "detect_single",
    "estimate_height",
    "confidence_interval_single",
    "ic_statistic",
    "test_constants",
    "power_energy",
]


def pen1(n: int, tau):
    """Multiscale log-log penalty of a single change at ``tau`` in ``2..n``.

    ``2 log log(e * max(min(tau, n/tau), min(n+1-tau, n/(n+1-tau))))``.
    Accepts an integer array of positions.
    """
    t = np.asarray(tau)
    if np.any(t < 2) or np.any(t > n):
        raise ValueError(f"tau must lie in [2, {n}]")
    t = t.astype(float)
    u = n + 1 - t
    scale = np.maximum(np.minimum(t, n / t), np.minimum(u, n / u))
    out = 2.0 * np.log(np.log(math.e * scale))
    return float(out) if out.ndim == 0 else out


def _all_taus(n: int) -> np.ndarray:
    return np.arange(2, n + 1)


def _squared_cusums(p: PrefixSums) -> np.ndarray:
    """``C^2(Y, (1, tau, n+1))`` for ``tau = 2..n``."""
    taus = _all_taus(p.n)
    c = cusum_many(p, np.ones_like(taus), taus, np.full_like(taus, p.n + 1))
    return c * c


def cr1(p: PrefixSums, tau: int, L: float) -> float:
    """Penalised least-squares criterion ``||Y - Pi_tau Y||^2 + L pen1(tau)``."""
    p = as_prefix(p)
    if not 2 <= tau <= p.n:
        raise ValueError(f"tau must lie in [2, {p.n}], got {tau}")
    r = p.segment_rss(1, tau) + p.segment_rss(tau, p.n + 1)
    return float(r) + L * pen1(p.n, tau)


def _cr1_all(p: PrefixSums, L: float) -> np.ndarray:
    taus = _all_taus(p.n)
    r = p.segment_rss(np.ones_like(taus), taus) + p.segment_rss(taus, np.full_like(taus, p.n + 1))
    return r + L * pen1(p.n, taus)


def estimate_single(p, L: float | None = None) -> int:
    """Minimiser of :func:`cr1` over ``tau`` in ``2..n`` (smallest on ties)."""
    p = as_prefix(p)
    L = defaults()["single"]["L"] if L is None else L
    if p.n < 2:
        raise ValueError("need n >= 2")
    return int(np.argmin(_cr1_all(p, L))) + 2


def test_constants(L: float, alpha: float) -> tuple[float, float]:
    """``(C_alpha, C_L) = (6 log(12/alpha), (2/L) log(L/(L-1)) - 2 log log L)``."""
    if L <= 1:
        raise ValueError(f"L must exceed 1, got {L}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    c_alpha = 6.0 * math.log(12.0 / alpha)
    c_L = (2.0 / L) * math.log(L / (L - 1.0)) - 2.0 * math.log(math.log(L))
    return c_alpha, c_L


@dataclass(frozen=True)
class SingleTestOutcome:
    """Result of the penalised max-CUSUM test of no change versus one change."""

    statistic: float
    threshold: float
    reject: bool
    argmin_tau: int


def detect_single(p, L: float | None = None, alpha: float | None = None) -> SingleTestOutcome:
    """Level-``alpha`` test for the existence of one change-point.

    The statistic is ``min_tau {-C^2(Y, (1, tau, n+1)) + L^2 pen1(tau)}`` and
    the null is rejected when it falls at or below ``-L^2 (C_alpha + C_L)``.
    """
    p = as_prefix(p)
    cfg = defaults()["single"]
    L = cfg["L"] if L is None else L
    alpha = cfg["alpha"] if alpha is None else alpha
    c_alpha, c_L = test_constants(L, alpha)
    vals = -_squared_cusums(p) + L * L * pen1(p.n, _all_taus(p.n))
    i = int(np.argmin(vals))
    stat = float(vals[i])
    threshold = -L * L * (c_alpha + c_L)
    return SingleTestOutcome(stat, threshold, bool(stat <= threshold), i + 2)


def power_energy(n: int, tau: int, L: float, alpha: float, beta: float) -> float:
    """Squared energy above which the test has type II error below ``beta``.

    ``L^3 pen1(tau) + (2L/(L+1)) log(2/beta) + L^3 (C_alpha + C_L)``.
    """
    c_alpha, c_L = test_constants(L, alpha)
    return L**3 * pen1(n, tau) + (2 * L / (L + 1)) * math.log(2 / beta) + L**3 * (c_alpha + c_L)


def estimate_height(p, tau_hat: int) -> float:
    """Right empirical mean minus left empirical mean around ``tau_hat``."""
    p = as_prefix(p)
    n = p.n
    if not 2 <= tau_hat <= n:
        raise ValueError(f"tau_hat must lie in [2, {n}], got {tau_hat}")
    right = p.segment_sum(tau_hat, n + 1) / (n + 1 - tau_hat)
    left = p.segment_sum(1, tau_hat) / (tau_hat - 1)
    return float(right - left)


def ic_statistic(p, L: float, kappa: float) -> float:
    """``T_IC = min_tau {-C^2(Y, (1, tau, n+1)) + (1 + kappa) L^2 pen1(tau)}``."""
    p = as_prefix(p)
    n = p.n
    return float(np.min(-_squared_cusums(p) + (1 + kappa) * L * L * pen1(n, _all_taus(n))))


@dataclass(frozen=True)
class SingleCIReport:
    """Confidence interval for a single change-point.

    ``interval`` is the integer range ``[lo, hi]``.  ``informative`` records
    whether the preliminary test rejected; ``degenerate`` flags the case where
    it rejected but the estimated height was zero, so the whole range is kept.
    """

    interval: tuple[int, int]
    tau_hat: int
    delta_hat: float
    informative: bool
    statistic: float
    degenerate: bool = False


def confidence_interval_single(
    p,
    L: float | None = None,
    kappa: float | None = None,
    alpha: float | None = None,
    c_width: float | None = None,
    c_test: float | None = None,
) -> SingleCIReport:
    """Confidence interval for the position of a single change-point.

    A first test with the inflated penalty ``(1 + kappa) L^2 pen1`` decides
    whether to localise at all.  On rejection the interval is
    ``tau_hat +/- c_width log(e/alpha) / delta_hat^2`` reduced to the integers
    it contains and clipped to ``[2, n]``; otherwise it is ``[2, n]``.

    Parameters
    ----------
    p : PrefixSums or array-like
        Observed series.
    L, kappa : float, optional
        Penalty multipliers, both in ``(1, 2)``.
    alpha : float, optional
        Miscoverage level.
    c_width, c_test : float, optional
        Width and test-threshold constants.  Defaults come from
        ``data/defaults.json``, calibrated by
        :func:`cpdetect.sim.calibrate_ci_constants`.
    """
    p = as_prefix(p)
    cfg = defaults()["single"]
    L = cfg["L"] if L is None else L
    kappa = cfg["kappa"] if kappa is None else kappa
    alpha = cfg["alpha"] if alpha is None else alpha
    c_width = cfg["c_width"] if c_width is None else c_width
    c_test = cfg["c_test"] if c_test is None else c_test
    if L <= 1 or kappa <= 0:
        raise ValueError(f"need L > 1 and kappa > 0, got L={L}, kappa={kappa}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if c_width <= 0 or c_test <= 0:
        raise ValueError("c_width and c_test must be positive")
    n = p.n
    t_ic = ic_statistic(p, L, kappa)
    tau_hat = estimate_single(p, L)
    delta_hat = estimate_height(p, tau_hat)
    log_term = math.log(math.e / alpha)
    informative = t_ic < -c_test * log_term
    if not informative:
        return SingleCIReport((2, n), tau_hat, delta_hat, False, t_ic)
    if delta_hat == 0.0:
        return SingleCIReport((2, n), tau_hat, delta_hat, True, t_ic, degenerate=True)
    half = c_width * log_term / delta_hat**2
    lo = max(2, math.ceil(tau_hat - half))
    hi = min(n, math.floor(tau_hat + half))
    return SingleCIReport((lo, hi), tau_hat, delta_hat, True, t_ic)
