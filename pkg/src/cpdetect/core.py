"""Series containers, change-point vectors and piecewise-constant projections.

Every public function uses 1-based positions: index ``i`` refers to ``Y_i``
with ``i`` in ``1..n``, and a change-point ``tau`` in ``2..n`` is the first
index of a new segment.  Segments are half-open, ``[a, b)`` covers
``Y_a, ..., Y_{b-1}``.  Arrays are stored 0-based internally; conversion
happens here and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "PrefixSums",
    "ChangePointVector",
    "PiecewiseSignal",
    "Triad",
    "piecewise_signal_values",
    "segment_mean",
    "project",
    "rss",
]

# above this length the prefix sums are accumulated in extended precision
_LONG_SERIES = 1_000_000


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Observed series ``Y_1, ..., Y_n``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 2:
            raise ValueError(f"a series needs n >= 2 values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.n


class PrefixSums:
    """Cumulative sums of a series and of its squares.

    ``s[i]`` is ``Y_1 + ... + Y_{i-1}`` (so ``s[1] = 0`` in 1-based indexing,
    stored here as ``s[0] = 0``) and ``s2`` is the same for ``Y_i**2``.
    A second pair of arrays built on the series centred at its mean feeds
    the residual sums of squares, which keeps ``sum(y^2) - sum(y)^2 / len``
    away from catastrophic cancellation when the series has a large offset.

    Parameters
    ----------
    values : array-like or TimeSeries
        The observed series.
    """

    __slots__ = ("n", "s", "s2", "shift", "cs", "cs2", "_values")

    def __init__(self, values):
        if isinstance(values, TimeSeries):
            y = values.values
        else:
            y = TimeSeries(values).values
        n = y.size
        dtype = np.longdouble if n > _LONG_SERIES else np.float64
        yl = y.astype(dtype)
        shift = float(np.mean(yl))
        c = yl - dtype(shift)
        self.n = n
        self.s = _frozen(np.concatenate(([0.0], np.cumsum(yl))).astype(float))
        self.s2 = _frozen(np.concatenate(([0.0], np.cumsum(yl * yl))).astype(float))
        self.shift = shift
        self.cs = _frozen(np.concatenate(([0.0], np.cumsum(c))).astype(float))
        self.cs2 = _frozen(np.concatenate(([0.0], np.cumsum(c * c))).astype(float))
        self._values = y

    @property
    def values(self) -> np.ndarray:
        return self._values

    def segment_sum(self, a, b):
        """Sum of ``Y`` over ``[a, b)``; accepts integer arrays."""
        return self.s[np.asarray(b) - 1] - self.s[np.asarray(a) - 1]

    def segment_rss(self, a, b):
        """Residual sum of squares of ``Y`` around its mean on ``[a, b)``."""
        a = np.asarray(a) - 1
        b = np.asarray(b) - 1
        sm = self.cs[b] - self.cs[a]
        out = (self.cs2[b] - self.cs2[a]) - sm * sm / (b - a)
        return np.maximum(out, 0.0)

    def __repr__(self):
        return f"PrefixSums(n={self.n})"


def as_prefix(data) -> PrefixSums:
    """Return ``data`` as :class:`PrefixSums`, building it if needed."""
    if isinstance(data, PrefixSums):
        return data
    return PrefixSums(data)


@dataclass(frozen=True)
class ChangePointVector:
    """Strictly increasing change-points ``2 <= tau_1 < ... < tau_K <= n``."""

    taus: np.ndarray
    n: int

    def __post_init__(self):
        t = np.asarray(self.taus)
        if t.size and not np.issubdtype(t.dtype, np.integer):
            if not np.all(t == np.round(t)):
                raise ValueError("change-points must be integers")
        t = t.astype(np.int64).ravel()
        n = int(self.n)
        if n < 2:
            raise ValueError(f"ambient length must be >= 2, got {n}")
        if t.size:
            if t[0] < 2 or t[-1] > n:
                raise ValueError(f"change-points must lie in [2, {n}], got {t.tolist()}")
            if np.any(np.diff(t) <= 0):
                raise ValueError("change-points must be strictly increasing")
        object.__setattr__(self, "taus", _frozen(t))
        object.__setattr__(self, "n", n)

    @classmethod
    def empty(cls, n: int) -> ChangePointVector:
        return cls(np.empty(0, dtype=np.int64), n)

    @classmethod
    def from_unsorted(cls, taus: Iterable[int], n: int) -> ChangePointVector:
        """Sort and de-duplicate ``taus`` before validating."""
        return cls(np.unique(np.asarray(list(taus), dtype=np.int64)), n)

    @property
    def K(self) -> int:
        return self.taus.size

    def __len__(self) -> int:
        return self.taus.size

    def __iter__(self):
        return (int(t) for t in self.taus)

    def __getitem__(self, k):
        return self.taus[k]

    def __eq__(self, other):
        if not isinstance(other, ChangePointVector):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.taus, other.taus)

    def __hash__(self):
        return hash((self.n, self.taus.tobytes()))

    def bounds(self) -> np.ndarray:
        """Change-points with the sentinels ``tau_0 = 1`` and ``tau_{K+1} = n + 1``."""
        return np.concatenate(([1], self.taus, [self.n + 1])).astype(np.int64)

    def tau(self, k: int) -> int:
        """``tau_k`` for ``k`` in ``0..K+1``, sentinels included."""
        if not 0 <= k <= self.K + 1:
            raise IndexError(f"k must be in [0, {self.K + 1}], got {k}")
        if k == 0:
            return 1
        if k == self.K + 1:
            return self.n + 1
        return int(self.taus[k - 1])

    def without(self, l: int) -> ChangePointVector:
        """The vector with its ``l``-th change-point (1-based) removed."""
        if not 1 <= l <= self.K:
            raise IndexError(f"l must be in [1, {self.K}], got {l}")
        return ChangePointVector(np.delete(self.taus, l - 1), self.n)

    def tolist(self) -> list[int]:
        return [int(t) for t in self.taus]

    def __repr__(self):
        return f"ChangePointVector({self.tolist()}, n={self.n})"


def as_cpv(taus, n: int) -> ChangePointVector:
    if isinstance(taus, ChangePointVector):
        if taus.n != n:
            raise ValueError(f"change-point vector built for n={taus.n}, series has n={n}")
        return taus
    return ChangePointVector(np.asarray(list(taus), dtype=np.int64), n)


@dataclass(frozen=True)
class PiecewiseSignal:
    """Ground-truth signal given by its change-points and segment means."""

    taus: ChangePointVector
    mus: np.ndarray

    def __post_init__(self):
        m = np.array(self.mus, dtype=float).ravel()
        if m.size != self.taus.K + 1:
            raise ValueError(f"need K+1={self.taus.K + 1} segment means, got {m.size}")
        if np.any(np.diff(m) == 0):
            raise ValueError("consecutive segment means must differ")
        object.__setattr__(self, "mus", _frozen(m))

    @classmethod
    def from_lists(cls, taus: Sequence[int], mus: Sequence[float], n: int) -> PiecewiseSignal:
        return cls(ChangePointVector(np.asarray(taus, dtype=np.int64), n), np.asarray(mus, float))

    @property
    def n(self) -> int:
        return self.taus.n

    @property
    def K(self) -> int:
        return self.taus.K

    @property
    def heights(self) -> np.ndarray:
        """``Delta_k = mu_{k+1} - mu_k`` for ``k = 1..K``."""
        return np.diff(self.mus)

    def values(self) -> np.ndarray:
        return piecewise_signal_values(self, self.n)


@dataclass(frozen=True)
class Triad:
    """Integer triple ``t1 < t2 < t3``: a CUSUM window ``[t1, t2) | [t2, t3)``."""

    t1: int
    t2: int
    t3: int

    def __post_init__(self):
        if not (1 <= self.t1 < self.t2 < self.t3):
            raise ValueError(f"invalid triad ({self.t1}, {self.t2}, {self.t3})")

    def check(self, n: int) -> Triad:
        if self.t3 > n + 1:
            raise ValueError(f"triad ({self.t1}, {self.t2}, {self.t3}) exceeds n+1={n + 1}")
        return self

    @property
    def d1(self) -> int:
        return self.t2 - self.t1

    @property
    def d2(self) -> int:
        return self.t3 - self.t2

    def __iter__(self):
        return iter((self.t1, self.t2, self.t3))


def as_triad(t) -> Triad:
    return t if isinstance(t, Triad) else Triad(*(int(x) for x in t))


def piecewise_signal_values(sig: PiecewiseSignal, n: int) -> np.ndarray:
    """Expand ``(tau, mu)`` into the mean vector ``theta`` of length ``n``."""
    if n != sig.n:
        raise ValueError(f"signal defined for n={sig.n}, asked for n={n}")
    lengths = np.diff(sig.taus.bounds())
    return np.repeat(sig.mus, lengths)


def segment_mean(p: PrefixSums, a: int, b: int) -> float:
    """Mean of ``Y`` over ``[a, b)``, ``1 <= a < b <= n + 1``."""
    if not 1 <= a < b <= p.n + 1:
        raise ValueError(f"need 1 <= a < b <= n+1, got a={a}, b={b}, n={p.n}")
    return float((p.s[b - 1] - p.s[a - 1]) / (b - a))


def project(p: PrefixSums, taus) -> np.ndarray:
    """Projection of ``Y`` onto vectors that are constant between change-points."""
    cpv = as_cpv(taus, p.n)
    b = cpv.bounds()
    means = p.segment_sum(b[:-1], b[1:]) / np.diff(b)
    return np.repeat(means, np.diff(b))


def rss(p: PrefixSums, taus) -> float:
    """``||Y - project(Y, taus)||^2`` from the prefix sums."""
    cpv = as_cpv(taus, p.n)
    b = cpv.bounds()
    return float(np.sum(p.segment_rss(b[:-1], b[1:])))
