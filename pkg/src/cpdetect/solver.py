"""Multiple change-points: multiscale penalised least squares solved exactly.

The criterion ``||Y - Pi_tau Y||^2 + L pen0(tau)`` is additive over
segments once the per-change constant ``q`` is charged to every segment and
removed once at the end, so a suffix dynamic programme finds its exact
minimiser.  The pruned variant discards candidate segment ends that can no
longer start an optimal segment and returns the same answer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._config import defaults
from .core import ChangePointVector, PrefixSums, as_cpv, as_prefix
from .stats import cusum

__all__ = [
    "SolverConfig",
    "DPResult",
    "pen0",
    "pen_bic",
    "cr0",
    "cr_bic",
    "criterion_delta_remove",
    "solve_dp",
    "solve_dp_pruned",
    "solve_bic",
    "default_q",
]

# margin (relative to the criterion scale) by which a pruned end must lose
PRUNE_RTOL = 1e-8
# the calibrated q is often zero; the criterion needs it strictly positive
Q_FLOOR = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Tuning of the multiscale criterion.

    ``q = None`` means "calibrate for the data length" through
    :func:`default_q`.  ``max_changes`` caps the number of change-points.
    """

    L: float = 2.0
    q: float | None = None
    max_changes: int | None = None
    pruning: bool = True

    def __post_init__(self):
        if not self.L > 1:
            raise ValueError(f"L must exceed 1, got {self.L}")
        if self.q is not None and not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.max_changes is not None and self.max_changes < 0:
            raise ValueError("max_changes must be non-negative")

    def resolved(self, n: int) -> SolverConfig:
        """Copy with ``q`` filled in for series length ``n``."""
        if self.q is not None:
            return self
        return SolverConfig(self.L, default_q(n), self.max_changes, self.pruning)


@dataclass(frozen=True)
class DPResult:
    """Optimal segmentation.

    ``per_segment_costs[i]`` is the residual sum of squares of segment ``i``
    plus its length penalty; ``criterion`` adds the per-change charges.
    ``visited`` counts the candidate evaluations made by the programme.
    """

    taus: ChangePointVector
    criterion: float
    per_segment_costs: np.ndarray
    L: float
    q: float
    visited: int = field(default=0, compare=False)


def default_q(n: int, alpha: float | None = None) -> float:
    """Calibrated ``q_{1-alpha}`` for length ``n`` (cached on disk).

    Uses full triad enumeration up to the exact-enumeration limit and the
    dyadic grid beyond it.  The noise event usually holds already at
    ``q = 0``, so the result is floored at ``Q_FLOOR``.
    """
    from .calibrate import N_EXACT, calibrate_q

    alpha = defaults()["solver"]["alpha"] if alpha is None else alpha
    mode = "full" if n <= N_EXACT else "grid"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = calibrate_q(n, alpha, reps=1000, seed=0, mode=mode, use_cache=True)
    return max(res.value, Q_FLOOR)


def pen0(n: int, taus, q: float) -> float:
    """``q |tau| + 2 sum_i log(n / (tau_i - tau_{i-1}))`` over all segments."""
    t = as_cpv(taus, n)
    seg = np.diff(t.bounds()).astype(float)
    return q * t.K + 2.0 * float(np.sum(np.log(n / seg)))


def pen_bic(n: int, taus) -> float:
    """Reference penalty ``2 |tau| log n``."""
    return 2.0 * as_cpv(taus, n).K * math.log(n)


def _segment_rss(p: PrefixSums, t: ChangePointVector) -> np.ndarray:
    b = t.bounds()
    return p.segment_rss(b[:-1], b[1:])


def _q_of(cfg: SolverConfig, n: int) -> float:
    return cfg.resolved(n).q


def cr0(p, taus, cfg: SolverConfig) -> float:
    """Penalised criterion ``||Y - Pi_tau Y||^2 + L pen0(tau)``."""
    p = as_prefix(p)
    t = as_cpv(taus, p.n)
    return float(np.sum(_segment_rss(p, t))) + cfg.L * pen0(p.n, t, _q_of(cfg, p.n))


def cr_bic(p, taus, L: float) -> float:
    """``||Y - Pi_tau Y||^2 + L pen_bic(tau)``."""
    p = as_prefix(p)
    t = as_cpv(taus, p.n)
    return float(np.sum(_segment_rss(p, t))) + L * pen_bic(p.n, t)


def criterion_delta_remove(p, taus, l: int, cfg: SolverConfig) -> float:
    """Closed form of ``cr0(tau) - cr0(tau without tau_l)``.

    Equals ``-C^2(Y, (tau_{l-1}, tau_l, tau_{l+1}))
    + L (2 log(n (tau_{l+1} - tau_{l-1}) / ((tau_{l+1} - tau_l)(tau_l - tau_{l-1}))) + q)``.
    """
    p = as_prefix(p)
    t = as_cpv(taus, p.n)
    if not 1 <= l <= t.K:
        raise ValueError(f"l must be in [1, {t.K}], got {l}")
    a, b, c = t.tau(l - 1), t.tau(l), t.tau(l + 1)
    cu = cusum(p, (a, b, c))
    ratio = p.n * (c - a) / ((c - b) * (b - a))
    return -cu * cu + cfg.L * (2.0 * math.log(ratio) + _q_of(cfg, p.n))


def _scale(p: PrefixSums, pen_len: np.ndarray, beta: float) -> float:
    # upper bound on every suffix cost: one segment over everything
    return max(1.0, float(p.segment_rss(1, p.n + 1)) + float(pen_len[p.n]) + beta)


def _backtrack(choice: np.ndarray, n: int) -> list[int]:
    taus = []
    a = 0
    while True:
        b = int(choice[a])
        if b >= n:
            return taus
        taus.append(b + 1)
        a = b


def _solve(p: PrefixSums, pen_len, beta, kprune, prune: bool, max_changes):
    n = p.n
    cs = np.ascontiguousarray(p.cs)
    cs2 = np.ascontiguousarray(p.cs2)
    if max_changes is not None and max_changes < n - 1:
        H, choice = _kernels.dp_capped(cs, cs2, pen_len, beta, int(max_changes))
        best_k = 1
        best = H[1, 0]
        for k in range(2, H.shape[0]):
            if H[k, 0] < best - _kernels.TIE_RTOL * max(1.0, abs(best)):
                best, best_k = H[k, 0], k
        taus = []
        a = 0
        for k in range(best_k, 1, -1):
            b = int(choice[k, a])
            taus.append(b + 1)
            a = b
        return taus, n * (best_k + 1)
    if prune:
        tol = PRUNE_RTOL * _scale(p, pen_len, beta)
        _, _, choice, visited = _kernels.dp_backward(cs, cs2, pen_len, beta, kprune, tol)
    else:
        _, _, choice, visited = _kernels.dp_exact(cs, cs2, pen_len, beta)
    return _backtrack(choice, n), int(visited)


def _multiscale_arrays(n: int, L: float, q: float):
    m = np.arange(n + 1, dtype=float)
    m[0] = 1.0
    pen_len = 2.0 * L * np.log(n / m)
    kprune = 2.0 * L * np.log(n * (m + 1.0) / m)
    return pen_len, L * q, kprune


def _result(p, taus, L, q, seg_pen, visited) -> DPResult:
    t = ChangePointVector(np.asarray(taus, dtype=np.int64), p.n)
    per_seg = _segment_rss(p, t) + seg_pen(np.diff(t.bounds()).astype(float))
    crit = float(np.sum(per_seg)) + L * q * t.K
    return DPResult(t, crit, per_seg, L, q, visited)


def _solve_multiscale(p, cfg: SolverConfig, prune: bool) -> DPResult:
    p = as_prefix(p)
    cfg = cfg.resolved(p.n)
    n, L, q = p.n, cfg.L, cfg.q
    pen_len, beta, kprune = _multiscale_arrays(n, L, q)
    taus, visited = _solve(p, pen_len, beta, kprune, prune, cfg.max_changes)
    return _result(p, taus, L, q, lambda seg: 2.0 * L * np.log(n / seg), visited)


def solve_dp(p, cfg: SolverConfig | None = None) -> DPResult:
    """Exact minimiser of :func:`cr0` by unpruned dynamic programming.

    Quadratic time.  Near-ties (relative ``1e-10``) go to fewer
    change-points, then to the lexicographically smallest vector.
    """
    return _solve_multiscale(p, cfg or SolverConfig(), prune=False)


def solve_dp_pruned(p, cfg: SolverConfig | None = None) -> DPResult:
    """Same minimiser as :func:`solve_dp` with inadmissible ends pruned.

    An end ``b`` is discarded at ``a`` when
    ``RSS(a, b) + G(b) - 2 L log(b - a + 1)`` exceeds the optimal suffix cost
    ``G(a)``: no segment starting before ``a`` can then end optimally at
    ``b``, because splitting it at ``a`` saves at least that much.
    """
    return _solve_multiscale(p, cfg or SolverConfig(), prune=True)


def solve_bic(p, L: float = 1.0, pruning: bool = True, max_changes: int | None = None) -> DPResult:
    """Minimiser of :func:`cr_bic`, the reference ``2 L |tau| log n`` criterion."""
    p = as_prefix(p)
    if L <= 0:
        raise ValueError(f"L must be positive, got {L}")
    n = p.n
    pen_len = np.zeros(n + 1)
    beta = 2.0 * L * math.log(n)
    taus, visited = _solve(p, pen_len, beta, np.zeros(n + 1), pruning, max_changes)
    t = ChangePointVector(np.asarray(taus, dtype=np.int64), n)
    per_seg = _segment_rss(p, t)
    crit = float(np.sum(per_seg)) + beta * t.K
    return DPResult(t, crit, per_seg, L, 0.0, visited)
