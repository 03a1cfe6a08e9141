"""Monte-Carlo thresholds for the uniform noise bounds.

Two suprema of the pure-noise CUSUM ``N(t)`` over a set of triads are
calibrated under standard Gaussian noise:

* ``zeta``: ``sup_t |N(t)| - sqrt(2 lg(t))``, used by the confidence radii;
* ``q``: ``sup_t N(t)^2 / 4 - 2 lg(t)``, the smallest ``q`` for which the
  multiscale criterion's noise event holds;

with ``lg(t) = log(n (t3 - t1) / ((t3 - t2)(t2 - t1)))``.  The triad set is
one of

``"full"``
    every triad, ``O(n^3)``; only allowed up to ``N_EXACT``.
``"grid"``
    every middle point with dyadic half-lengths, clamped at the edges.
    Contains the triads used by dyadic radii.
``"centered"``
    the clamped centred triads ``t(tau, r)`` for every ``tau`` and ``r``.
    Contains the triads used by non-dyadic radii; ``O(n^2)``.

Replicate ``i`` of a run with seed ``s`` always draws from the Philox stream
keyed by ``(s, i)``, so results do not depend on the number of workers.
"""

from __future__ import annotations

import json
import math
import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _kernels

__all__ = [
    "N_EXACT",
    "MODES",
    "CalibrationResult",
    "dyadic_lengths",
    "noise_sups",
    "sup_centered_noise",
    "sup_q_noise",
    "replicate_rng",
    "sample_sups",
    "calibrate_zeta",
    "calibrate_q",
    "cache_path",
]

N_EXACT = 128
MODES = ("full", "grid", "centered")
MIN_REPS = 100

_cache_lock = threading.Lock()


@dataclass(frozen=True)
class CalibrationResult:
    """A calibrated threshold and the run that produced it."""

    kind: str
    n: int
    alpha: float
    value: float
    replicates: int
    exact: bool
    seed: int
    mode: str
    cached: bool = False


def dyadic_lengths(n: int) -> np.ndarray:
    """``1, 2, 4, ..., 2^floor(log2 n)``."""
    return 2 ** np.arange(int(math.floor(math.log2(n))) + 1, dtype=np.int64)


def _check_mode(mode: str, n: int, n_exact: int):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "full" and n > n_exact:
        raise ValueError(
            f"full enumeration is limited to n <= {n_exact} (got n={n}); use mode='grid'"
        )


def _sups(cs: np.ndarray, mode: str) -> np.ndarray:
    if mode == "full":
        return _kernels.sup_full(cs)
    if mode == "grid":
        return _kernels.sup_grid(cs, dyadic_lengths(cs.size - 1))
    return _kernels.sup_centered(cs)


def noise_sups(noise, mode: str = "full", n_exact: int = N_EXACT) -> tuple[float, float]:
    """Both suprema ``(zeta statistic, q statistic)`` for one noise vector."""
    e = np.asarray(noise, dtype=float).ravel()
    if e.size < 2:
        raise ValueError("noise needs at least 2 values")
    _check_mode(mode, e.size, n_exact)
    cs = np.concatenate(([0.0], np.cumsum(e - e.mean())))
    z, q = _sups(cs, mode)
    return float(z), float(q)


def sup_centered_noise(noise, mode: str = "full", n_exact: int = N_EXACT) -> float:
    """``sup_t |N(t)| - sqrt(2 lg(t))`` over the triad set ``mode``."""
    return noise_sups(noise, mode, n_exact)[0]


def sup_q_noise(noise, mode: str = "full", n_exact: int = N_EXACT) -> float:
    """``sup_t N(t)^2 / 4 - 2 lg(t)`` over the triad set ``mode``."""
    return noise_sups(noise, mode, n_exact)[1]


def replicate_rng(seed: int, i: int) -> np.random.Generator:
    """Independent generator for replicate ``i`` of a run seeded by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i,))))


def _workers(threads: int | None) -> int:
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def sample_sups(
    n: int,
    reps: int,
    seed: int,
    mode: str = "full",
    threads: int | None = None,
    n_exact: int = N_EXACT,
    start: int = 0,
) -> np.ndarray:
    """``(reps, 2)`` array of both suprema over fresh Gaussian noise.

    Row ``j`` uses replicate stream ``start + j``.
    """
    _check_mode(mode, n, n_exact)
    out = np.empty((reps, 2))
    dyadic = dyadic_lengths(n)

    def work(j):
        e = replicate_rng(seed, start + j).standard_normal(n)
        cs = np.concatenate(([0.0], np.cumsum(e)))
        if mode == "grid":
            out[j] = _kernels.sup_grid(cs, dyadic)
        else:
            out[j] = _sups(cs, mode)

    w = _workers(threads)
    if w == 1:
        for j in range(reps):
            work(j)
    else:
        with ThreadPoolExecutor(w) as ex:
            list(ex.map(work, range(reps)))
    return out


def _order_stat(x: np.ndarray, alpha: float) -> float:
    k = math.ceil(round((1.0 - alpha) * x.size, 9))
    return float(np.sort(x)[max(k, 1) - 1])


def cache_path() -> Path:
    """Calibration cache file; ``CPDETECT_CACHE`` overrides the default."""
    env = os.environ.get("CPDETECT_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "cpdetect" / "calibration.json"


def _key(kind, n, alpha, reps, seed, mode) -> str:
    return f"{kind}|n={n}|alpha={alpha!r}|reps={reps}|seed={seed}|mode={mode}"


def _read_cache(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except (FileNotFoundError, json.JSONDecodeError):
        return {}


def _write_cache(path: Path, key: str, res: CalibrationResult):
    with _cache_lock:
        data = _read_cache(path)
        entry = asdict(res)
        entry.pop("cached")
        data[key] = entry
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        os.replace(tmp, path)


def _calibrate(kind, n, alpha, reps, seed, mode, threads, use_cache, path, n_exact):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} replicates, got {reps}")
    if n < 2:
        raise ValueError("n must be >= 2")
    _check_mode(mode, n, n_exact)
    key = _key(kind, n, alpha, reps, seed, mode)
    path = Path(path) if path is not None else cache_path()
    if use_cache:
        hit = _read_cache(path).get(key)
        if hit is not None:
            return CalibrationResult(**hit, cached=True)
    if mode != "full":
        warnings.warn(
            f"mode={mode!r} uses a subset of triads; the threshold may be slightly low",
            stacklevel=3,
        )
    sups = sample_sups(n, reps, seed, mode, threads, n_exact)
    # both statistics come from the same draws, so both are cached
    out = {}
    for col, k in enumerate(("zeta", "q")):
        value = _order_stat(sups[:, col], alpha)
        if k == "q":
            value = max(value, 0.0)
        out[k] = CalibrationResult(k, n, alpha, value, reps, mode == "full", seed, mode)
        if use_cache:
            _write_cache(path, _key(k, n, alpha, reps, seed, mode), out[k])
    return out[kind]


def calibrate_zeta(
    n: int,
    alpha: float = 0.05,
    reps: int = 1000,
    seed: int = 0,
    mode: str = "full",
    threads: int | None = None,
    use_cache: bool = False,
    path=None,
    n_exact: int = N_EXACT,
) -> CalibrationResult:
    """Monte-Carlo ``zeta_{1-alpha}``: the ``ceil((1-alpha) reps)``-th order
    statistic of :func:`sup_centered_noise` over ``reps`` Gaussian draws.

    Parameters
    ----------
    n : int
        Series length.
    alpha : float
        Target violation probability.
    reps : int
        Number of replicates, at least 100.
    seed : int
        Root seed of the replicate streams.
    mode : {"full", "grid", "centered"}
        Triad set; see the module docstring.
    threads : int, optional
        Worker threads (default: all CPUs).  Does not change the result.
    use_cache : bool
        Read and write the JSON cache at ``path`` (default :func:`cache_path`).
    """
    return _calibrate("zeta", n, alpha, reps, seed, mode, threads, use_cache, path, n_exact)


def calibrate_q(
    n: int,
    alpha: float = 0.05,
    reps: int = 1000,
    seed: int = 0,
    mode: str = "full",
    threads: int | None = None,
    use_cache: bool = False,
    path=None,
    n_exact: int = N_EXACT,
) -> CalibrationResult:
    """Monte-Carlo ``q_{1-alpha}``, floored at zero.

    Same arguments as :func:`calibrate_zeta`; the statistic is
    :func:`sup_q_noise`.
    """
    return _calibrate("q", n, alpha, reps, seed, mode, threads, use_cache, path, n_exact)
