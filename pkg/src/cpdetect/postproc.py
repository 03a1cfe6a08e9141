"""CUSUM post-processing of candidate change-points.

Each candidate ``tau`` gets a confidence radius: the smallest ``r`` at which
the CUSUM on the clamped centred triad ``t(tau, r)`` clears the multiscale
threshold shifted by ``zeta``.  Pruning keeps a set of candidates whose
intervals ``[t1 + 1, t3 - 1]`` are pairwise disjoint, preferring small radii;
local improvement then moves each survivor to the CUSUM maximiser inside its
interval, computed on a window twice as wide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .calibrate import dyadic_lengths
from .core import ChangePointVector, PrefixSums, Triad, as_cpv, as_prefix
from .stats import cusum_many

__all__ = [
    "RadiusResult",
    "PostprocReport",
    "triad_at",
    "radius",
    "radii",
    "prune",
    "local_improve",
    "postprocess",
    "detect_full",
    "global_confidence_region",
    "merge_intervals",
]


@dataclass(frozen=True)
class RadiusResult:
    """Confidence radius of one candidate.

    ``radius`` is ``math.inf`` when no radius is significant, in which case
    ``interval`` is ``None``.
    """

    tau: int
    radius: float
    interval: tuple[int, int] | None

    @property
    def finite(self) -> bool:
        return self.interval is not None


@dataclass(frozen=True)
class PostprocReport:
    """Output of :func:`postprocess`.

    ``radii`` lists the radius of every pruning survivor, aligned with
    ``pruned``.
    """

    pruned: ChangePointVector
    improved: ChangePointVector
    radii: tuple[RadiusResult, ...]
    zeta: float
    dyadic: bool

    @property
    def intervals(self) -> list[tuple[int, int]]:
        return [r.interval for r in self.radii]


def triad_at(tau: int, r: int, n: int) -> Triad:
    """``((tau - r) v 1, tau, (tau + r) ^ (n + 1))``."""
    if not 2 <= tau <= n:
        raise ValueError(f"tau must lie in [2, {n}], got {tau}")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return Triad(max(tau - r, 1), tau, min(tau + r, n + 1))


def _radius_grid(n: int, dyadic: bool) -> np.ndarray:
    return dyadic_lengths(n) if dyadic else np.arange(1, n + 1, dtype=np.int64)


def _radii_arrays(p: PrefixSums, taus: np.ndarray, zeta: float, dyadic: bool):
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    taus = np.ascontiguousarray(taus, dtype=np.int64)
    return _kernels.radii(np.ascontiguousarray(p.cs), taus, float(zeta), _radius_grid(p.n, dyadic))


def _as_result(tau, r, t1, t3) -> RadiusResult:
    if r < 0:
        return RadiusResult(int(tau), math.inf, None)
    return RadiusResult(int(tau), int(r), (int(t1) + 1, int(t3) - 1))


def radii(p, taus, zeta: float, dyadic: bool = False) -> list[RadiusResult]:
    """:func:`radius` of every change-point in ``taus``."""
    p = as_prefix(p)
    t = as_cpv(taus, p.n)
    r, t1, t3 = _radii_arrays(p, t.taus, zeta, dyadic)
    return [_as_result(*row) for row in zip(t.taus, r, t1, t3)]


def radius(p, tau: int, zeta: float, dyadic: bool = False) -> RadiusResult:
    """Smallest significant radius of ``tau``.

    Parameters
    ----------
    p : PrefixSums or array-like
        Observed series.
    tau : int
        Candidate in ``2..n``.
    zeta : float
        Threshold shift, positive.
    dyadic : bool
        Search ``r`` over powers of two instead of ``1..n``.

    Returns
    -------
    RadiusResult
        With interval ``[t1 + 1, t3 - 1]`` of the triad at the radius found.
    """
    p = as_prefix(p)
    if not 2 <= tau <= p.n:
        raise ValueError(f"tau must lie in [2, {p.n}], got {tau}")
    return radii(p, [tau], zeta, dyadic)[0]


def _prune_idx(p: PrefixSums, taus: np.ndarray, zeta: float, dyadic: bool):
    r, t1, t3 = _radii_arrays(p, taus, zeta, dyadic)
    rkey = np.where(r < 0, np.inf, r.astype(float))
    order = np.lexsort((taus, -rkey)).astype(np.int64)
    keep = _kernels.prune_scan(order, r, t1 + 1, t3 - 1, p.n)
    return np.flatnonzero(keep), r, t1, t3


def prune(p, taus, zeta: float, dyadic: bool = False) -> ChangePointVector:
    """Pruning step: candidates with disjoint intervals and finite radii.

    Candidates are ordered by decreasing radius (ties by position).  Going
    from the smallest radius upwards, a candidate is removed when its radius
    is infinite or its interval meets the interval of any candidate with a
    smaller radius, removed or not.
    """
    p = as_prefix(p)
    t = as_cpv(taus, p.n)
    idx, *_ = _prune_idx(p, t.taus, zeta, dyadic)
    return ChangePointVector(t.taus[idx], p.n)


def _improve(p: PrefixSums, tau: int, r: int, lo: int, hi: int) -> int:
    n = p.n
    w1 = max(tau - 2 * r + 1, 1)
    w3 = min(tau + 2 * r - 1, n + 1)
    cand = np.arange(lo, hi + 1)
    c = np.abs(cusum_many(p, np.full_like(cand, w1), cand, np.full_like(cand, w3)))
    return int(cand[np.argmax(c)])


def local_improve(p, tau: int, zeta: float, dyadic: bool = False) -> int:
    """Maximiser of ``|C(Y, (w1, tau', w3))|`` over ``tau'`` in the interval.

    ``(w1, w3)`` are the ends of ``t(tau, 2 r - 1)`` for the radius ``r`` of
    ``tau``; ties go to the smallest ``tau'``.
    """
    p = as_prefix(p)
    res = radius(p, tau, zeta, dyadic)
    if not res.finite:
        raise ValueError(f"tau={tau} has an infinite radius; prune it first")
    return _improve(p, tau, int(res.radius), *res.interval)


def postprocess(p, taus, zeta: float, dyadic: bool = False) -> PostprocReport:
    """Pruning followed by local improvement of every survivor."""
    p = as_prefix(p)
    t = as_cpv(taus, p.n)
    idx, r, t1, t3 = _prune_idx(p, t.taus, zeta, dyadic)
    kept = t.taus[idx]
    res = tuple(_as_result(t.taus[i], r[i], t1[i], t3[i]) for i in idx)
    improved = [_improve(p, x.tau, int(x.radius), *x.interval) for x in res]
    return PostprocReport(
        ChangePointVector(kept, p.n),
        ChangePointVector.from_unsorted(improved, p.n),
        res,
        float(zeta),
        bool(dyadic),
    )


def detect_full(p, zeta: float, dyadic: bool = True) -> PostprocReport:
    """Self-standing detector: :func:`postprocess` of every position ``2..n``.

    In dyadic mode the radii cost ``O(log n)`` per position and the pruning
    scan ``O(log n)`` per candidate.
    """
    p = as_prefix(p)
    if p.n < 3:
        raise ValueError("need n >= 3")
    return postprocess(p, ChangePointVector(np.arange(2, p.n + 1), p.n), zeta, dyadic)


def merge_intervals(intervals) -> list[tuple[int, int]]:
    """Union of closed integer intervals as maximal overlapping runs."""
    out: list[list[int]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def global_confidence_region(p, taus, zeta: float, dyadic: bool = False) -> list[tuple[int, int]]:
    """Union of the finite-radius intervals of ``taus``, merged."""
    return merge_intervals(r.interval for r in radii(p, taus, zeta, dyadic) if r.finite)
