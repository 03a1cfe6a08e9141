"""Synthetic signals, noise families and Monte-Carlo experiments.

A :class:`ScenarioSpec` describes a signal, a noise family, a procedure and
its tuning.  :func:`run_scenario` draws one independent noise stream per
replicate (keyed by the scenario seed and the replicate index), runs the
procedure and aggregates per-replicate scores into an
:class:`ExperimentReport` with Monte-Carlo standard errors.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from statistics import NormalDist

import numpy as np

from . import calibrate as _cal
from ._config import defaults
from .core import ChangePointVector, PiecewiseSignal, PrefixSums, TimeSeries
from .metrics import check_detec, check_nosp, d_hausdorff, d_wasserstein
from .postproc import detect_full, postprocess
from .single import (
    confidence_interval_single,
    detect_single,
    estimate_height,
    estimate_single,
    ic_statistic,
)
from .solver import SolverConfig, default_q, solve_bic, solve_dp, solve_dp_pruned

__all__ = [
    "NOISE_FAMILIES",
    "PROCEDURES",
    "Tuning",
    "ScenarioSpec",
    "ExperimentReport",
    "draw_noise",
    "build_signal",
    "resolve_tuning",
    "run_procedure",
    "run_scenario",
    "adaptive_estimate",
    "estimate_sigma",
    "calibrate_ci_constants",
    "load_scenarios",
    "write_reports_csv",
    "write_reports_json",
    "bundled_scenario",
]

NOISE_FAMILIES = ("gaussian", "rademacher", "uniform")
PROCEDURES = (
    "single-test",
    "single-estimate",
    "single-ci",
    "dp",
    "dp-pruned",
    "bic",
    "lp-full",
    "lp-dp",
    "adaptive",
)
MULTI_PROCEDURES = ("dp", "dp-pruned", "lp-full", "lp-dp")
# seed of the threshold calibrations triggered by scenarios
CALIBRATION_SEED = 0
CALIBRATION_REPS = 1000
TINY_HEIGHT = 0.05


def draw_noise(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws with sub-Gaussian constant 1.

    Gaussian is standard, Rademacher is uniform on ``{-1, 1}`` and uniform
    is on ``[-1, 1]``, the Hoeffding scaling of uniform ``[-sqrt 3, sqrt 3]``.
    """
    if family == "gaussian":
        return rng.standard_normal(n)
    if family == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=n)
    if family == "uniform":
        return rng.uniform(-1.0, 1.0, size=n)
    raise ValueError(f"noise family must be one of {NOISE_FAMILIES}, got {family!r}")


@dataclass(frozen=True)
class Tuning:
    """Procedure tuning.

    ``q = None`` and ``zeta = "calibrate"`` are resolved by Monte Carlo for
    the series length.  ``multi`` is the first stage of ``adaptive``.
    ``c_width`` and ``c_test`` default to the package settings.
    """

    L: float = 2.0
    q: float | None = None
    alpha: float = 0.05
    L_single: float = 1.5
    kappa: float = 1.5
    zeta: float | str = "calibrate"
    dyadic: bool = True
    multi: str = "lp-full"
    c_width: float | None = None
    c_test: float | None = None

    def __post_init__(self):
        if self.multi not in MULTI_PROCEDURES:
            raise ValueError(f"multi must be one of {MULTI_PROCEDURES}, got {self.multi!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.zeta == "calibrate" or (isinstance(self.zeta, (int, float)) and self.zeta > 0)):
            raise ValueError(f"zeta must be positive or 'calibrate', got {self.zeta!r}")
        SolverConfig(self.L, self.q)


def _zeta_mode(n: int, dyadic: bool) -> str:
    if n <= _cal.N_EXACT:
        return "full"
    return "grid" if dyadic else "centered"


def resolve_tuning(
    t: Tuning, n: int, threads: int | None = None, need_q: bool = True, need_zeta: bool = True
) -> Tuning:
    """Copy of ``t`` with calibrated ``q`` and ``zeta`` filled in for length ``n``.

    Thresholds a procedure does not use can be left unresolved with
    ``need_q`` or ``need_zeta``.
    """
    q = t.q
    if need_q and q is None:
        q = default_q(n, t.alpha)
    zeta = t.zeta
    if need_zeta and zeta == "calibrate":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            zeta = _cal.calibrate_zeta(
                n,
                t.alpha,
                CALIBRATION_REPS,
                CALIBRATION_SEED,
                _zeta_mode(n, t.dyadic),
                threads=threads,
                use_cache=True,
            ).value
    cfg = defaults()["single"]
    return replace(
        t,
        q=q,
        zeta=zeta,
        c_width=cfg["c_width"] if t.c_width is None else t.c_width,
        c_test=cfg["c_test"] if t.c_test is None else t.c_test,
    )


@dataclass(frozen=True)
class ScenarioSpec:
    """One Monte-Carlo experiment.

    The signal is either explicit (``taus`` and ``mus``) or generated:
    ``K`` equispaced jumps of alternating sign and absolute height
    ``height``, plus ``tiny_jumps`` equispaced nuisance jumps whose height is
    ``0.05 / sqrt(shortest adjacent segment)``.  Without either, the signal
    is zero.

    ``detec_c`` enables the detection check with constants ``detec_kappa``
    and ``detec_q`` (default: the resolved ``q``).
    """

    name: str = "scenario"
    n: int = 500
    taus: tuple[int, ...] | None = None
    mus: tuple[float, ...] | None = None
    K: int = 0
    height: float = 0.0
    tiny_jumps: int = 0
    noise: str = "gaussian"
    replicates: int = 100
    seed: int = 0
    procedure: str = "adaptive"
    tuning: Tuning = field(default_factory=Tuning)
    detec_c: float | None = None
    detec_kappa: float = 1.0
    detec_q: float | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.noise not in NOISE_FAMILIES:
            raise ValueError(f"noise must be one of {NOISE_FAMILIES}, got {self.noise!r}")
        if self.procedure not in PROCEDURES:
            raise ValueError(f"procedure must be one of {PROCEDURES}, got {self.procedure!r}")
        if (self.taus is None) != (self.mus is None):
            raise ValueError("taus and mus must be given together")
        if isinstance(self.tuning, dict):
            object.__setattr__(self, "tuning", Tuning(**self.tuning))
        for name in ("taus", "mus"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(v))

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioSpec:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown scenario keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def build_signal(spec: ScenarioSpec) -> PiecewiseSignal | None:
    """Ground truth of ``spec``; ``None`` for the zero signal."""
    n = spec.n
    if spec.taus is not None:
        return PiecewiseSignal.from_lists(spec.taus, spec.mus, n)
    if spec.K == 0 and spec.tiny_jumps == 0:
        return None
    strong = {int(round(j * n / (spec.K + 1))) + 1: True for j in range(1, spec.K + 1)}
    tiny = []
    T = spec.tiny_jumps
    for j in range(T):
        # offset by half a spacing from the strong grid
        pos = int(round((j + 0.5) * n / T)) + 1
        while pos in strong or pos in tiny:
            pos += 1
        tiny.append(pos)
    taus = sorted(set(strong) | set(tiny))
    if taus and (taus[0] < 2 or taus[-1] > n):
        raise ValueError("the requested jumps do not fit in the series")
    b = [1, *taus, n + 1]
    mus = [0.0]
    sign = 1.0
    for k, t in enumerate(taus, start=1):
        if t in strong:
            mus.append(mus[-1] + sign * spec.height)
            sign = -sign
        else:
            shortest = min(b[k] - b[k - 1], b[k + 1] - b[k])
            mus.append(mus[-1] + TINY_HEIGHT / math.sqrt(shortest))
    return PiecewiseSignal.from_lists(taus, mus, n)


def _solver_cfg(t: Tuning, pruning: bool = True) -> SolverConfig:
    return SolverConfig(t.L, t.q, None, pruning)


def _multi(name: str, p: PrefixSums, t: Tuning) -> ChangePointVector:
    if name == "dp":
        return solve_dp(p, _solver_cfg(t, False)).taus
    if name == "dp-pruned":
        return solve_dp_pruned(p, _solver_cfg(t)).taus
    if name == "lp-full":
        return detect_full(p, t.zeta, t.dyadic).improved
    if name == "lp-dp":
        return postprocess(p, solve_dp_pruned(p, _solver_cfg(t)).taus, t.zeta, t.dyadic).improved
    raise ValueError(f"unknown multiple change-point procedure {name!r}")


def adaptive_estimate(p, tuning: Tuning | None = None) -> ChangePointVector:
    """Multiple change-point procedure with a single change-point rescue.

    Runs ``tuning.multi``; when it finds nothing, the single change-point
    test decides whether to return the single-change estimate.
    """
    p = p if isinstance(p, PrefixSums) else PrefixSums(p)
    t = tuning or Tuning()
    need_q = t.multi != "lp-full"
    need_zeta = t.multi in ("lp-full", "lp-dp")
    if (need_q and t.q is None) or (need_zeta and t.zeta == "calibrate"):
        t = resolve_tuning(t, p.n, need_q=need_q, need_zeta=need_zeta)
    est = _multi(t.multi, p, t)
    if est.K:
        return est
    if detect_single(p, t.L_single, t.alpha).reject:
        return ChangePointVector(np.array([estimate_single(p, t.L_single)]), p.n)
    return ChangePointVector.empty(p.n)


def run_procedure(name: str, p: PrefixSums, t: Tuning) -> dict:
    """Run procedure ``name`` with resolved tuning; returns its raw output."""
    if name == "single-test":
        return {"reject": detect_single(p, t.L_single, t.alpha).reject}
    if name == "single-estimate":
        tau = estimate_single(p, t.L_single)
        return {"est": ChangePointVector(np.array([tau]), p.n)}
    if name == "single-ci":
        rep = confidence_interval_single(p, t.L_single, t.kappa, t.alpha, t.c_width, t.c_test)
        return {"ci": rep, "est": ChangePointVector(np.array([rep.tau_hat]), p.n)}
    if name == "bic":
        return {"est": solve_bic(p, t.L).taus}
    if name == "adaptive":
        return {"est": adaptive_estimate(p, t)}
    return {"est": _multi(name, p, t)}


def estimate_sigma(series) -> float:
    """Noise level from the median absolute first difference.

    ``median |Y_{i+1} - Y_i| / (sqrt 2 z_{0.75})``; divide the series by it
    before detection.
    """
    y = series.values if isinstance(series, TimeSeries) else TimeSeries(series).values
    if y.size < 3:
        raise ValueError("need n >= 3")
    s = float(np.median(np.abs(np.diff(y)))) / (math.sqrt(2.0) * NormalDist().inv_cdf(0.75))
    if s == 0.0:
        raise ValueError("degenerate series: the median absolute difference is zero")
    return s


def _score(spec: ScenarioSpec, sig, out: dict, detec_q: float) -> dict:
    row: dict = {}
    if "reject" in out:
        row["reject"] = float(out["reject"])
        return row
    est: ChangePointVector = out["est"]
    row["n_changes"] = float(est.K)
    if "ci" in out:
        ci = out["ci"]
        lo, hi = ci.interval
        row["ci_width"] = float(hi - lo)
        row["ci_informative"] = float(ci.informative)
        if sig is not None and sig.K == 1:
            row["ci_cover"] = float(lo <= sig.taus[0] <= hi)
    if sig is None:
        row["nosp"] = float(est.K == 0)
        return row
    truth = sig.taus
    row["nosp"] = float(check_nosp(est, truth))
    row["hausdorff"] = float(d_hausdorff(est, truth))
    if est.K == truth.K:
        row["wasserstein"] = float(d_wasserstein(est, truth))
    b = truth.bounds()
    e = est.taus
    half_gap = np.minimum(np.diff(b)[:-1], np.diff(b)[1:]) / 2
    if e.size:
        dist = np.array([np.min(np.abs(e - t)) for t in truth.taus], dtype=float)
    else:
        dist = np.full(truth.K, math.inf)
    row["all_hit"] = float(np.all(dist <= half_gap))
    heights2 = sig.heights**2
    for k in range(truth.K):
        row[f"loc_{k + 1}"] = float(dist[k] * heights2[k])
    if spec.detec_c is not None:
        rep = check_detec(est, sig, spec.detec_kappa, detec_q, spec.detec_c)
        row["detec"] = float(rep.passed)
        for k in np.flatnonzero(rep.high_energy):
            denom = math.log(max(1.0, sig.n * heights2[k])) + detec_q
            row[f"detec_ratio_{k + 1}"] = float(dist[k] * heights2[k] / denom) if denom > 0 else math.inf
    return row


RATE_METRICS = ("reject", "nosp", "detec", "all_hit", "ci_cover", "ci_informative")
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class ExperimentReport:
    """Aggregated scenario results.

    ``rates`` maps a binary metric to ``(p_hat, se)`` with
    ``se = sqrt(p_hat (1 - p_hat) / reps)``; ``quantiles`` maps a real metric
    to its empirical quantiles at :data:`QUANTILES`; ``means`` to its mean.
    ``per_replicate`` keeps the raw scores.
    """

    name: str
    procedure: str
    n: int
    replicates: int
    seed: int
    tuning: dict
    rates: dict
    quantiles: dict
    means: dict
    seconds_per_replicate: float
    calibration: dict
    per_replicate: list = field(default_factory=list, repr=False)

    def rate(self, metric: str) -> float:
        return self.rates[metric][0]

    def se(self, metric: str) -> float:
        return self.rates[metric][1]

    def column(self, metric: str) -> np.ndarray:
        return np.array([r.get(metric, np.nan) for r in self.per_replicate])

    def rows(self) -> list[dict]:
        """One row per (scenario, metric) for CSV output."""
        out = []
        for m, (p, se) in self.rates.items():
            out.append({"scenario": self.name, "metric": m, "value": p, "se": se})
        for m, qs in self.quantiles.items():
            for lvl, v in qs.items():
                out.append({"scenario": self.name, "metric": f"{m}_q{lvl}", "value": v, "se": ""})
        for m, v in self.means.items():
            out.append({"scenario": self.name, "metric": f"{m}_mean", "value": v, "se": ""})
        out.append(
            {
                "scenario": self.name,
                "metric": "seconds_per_replicate",
                "value": self.seconds_per_replicate,
                "se": "",
            }
        )
        return out

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        d.pop("per_replicate")
        if not timings:
            d.pop("seconds_per_replicate")
        return d


def _aggregate(spec, t: Tuning, scores: list[dict], seconds: float, calib: dict) -> ExperimentReport:
    keys = sorted({k for r in scores for k in r})
    rates, quants, means = {}, {}, {}
    for k in keys:
        v = np.array([r[k] for r in scores if k in r], dtype=float)
        if k in RATE_METRICS:
            p = float(v.mean())
            rates[k] = (p, math.sqrt(p * (1 - p) / v.size))
        else:
            # infinite distances would turn interpolated quantiles into nan
            with np.errstate(invalid="ignore"):
                qs = np.nan_to_num(np.quantile(v, QUANTILES), nan=math.inf)
            quants[k] = {str(q): float(x) for q, x in zip(QUANTILES, qs)}
            means[k] = float(v.mean())
    return ExperimentReport(
        spec.name,
        spec.procedure,
        spec.n,
        spec.replicates,
        spec.seed,
        asdict(t),
        rates,
        quants,
        means,
        seconds / spec.replicates,
        calib,
        scores,
    )


def run_scenario(spec: ScenarioSpec, threads: int | None = 1) -> ExperimentReport:
    """Run all replicates of ``spec`` and aggregate them.

    Replicate ``i`` draws its noise from the stream keyed by
    ``(spec.seed, i)``; the report does not depend on ``threads``.
    """
    t = spec.tuning
    multi = t.multi if spec.procedure == "adaptive" else spec.procedure
    need_q = multi in ("dp", "dp-pruned", "lp-dp") or spec.detec_c is not None
    need_zeta = multi in ("lp-full", "lp-dp")
    t = resolve_tuning(t, spec.n, threads, need_q, need_zeta)
    calib = {}
    if need_q and spec.tuning.q is None:
        calib["q"] = t.q
    if need_zeta and spec.tuning.zeta == "calibrate":
        calib["zeta"] = t.zeta
        calib["zeta_mode"] = _zeta_mode(spec.n, t.dyadic)
    sig = build_signal(spec)
    theta = sig.values() if sig is not None else np.zeros(spec.n)
    detec_q = spec.detec_q if spec.detec_q is not None else t.q

    def one(i: int) -> dict:
        rng = _cal.replicate_rng(spec.seed, i)
        y = theta + draw_noise(spec.noise, spec.n, rng)
        out = run_procedure(spec.procedure, PrefixSums(y), t)
        return _score(spec, sig, out, detec_q)

    start = time.perf_counter()
    w = _cal._workers(threads)
    if w == 1:
        scores = [one(i) for i in range(spec.replicates)]
    else:
        with ThreadPoolExecutor(w) as ex:
            scores = list(ex.map(one, range(spec.replicates)))
    seconds = time.perf_counter() - start
    return _aggregate(spec, t, scores, seconds, calib)


def _ci_stats(n, delta, frac, reps, seed, alpha, t: Tuning):
    tau = int(round(frac * n)) + 1
    theta = np.where(np.arange(1, n + 1) >= tau, delta, 0.0)
    log_term = math.log(math.e / alpha)
    ratios = np.empty(reps)
    for i in range(reps):
        p = PrefixSums(theta + _cal.replicate_rng(seed, i).standard_normal(n))
        th = estimate_single(p, t.L_single)
        dh = estimate_height(p, th)
        ratios[i] = abs(th - tau) * dh * dh / log_term
    return ratios


def _null_tic(n, reps, seed, alpha, t: Tuning):
    log_term = math.log(math.e / alpha)
    out = np.empty(reps)
    for i in range(reps):
        p = PrefixSums(_cal.replicate_rng(seed, i).standard_normal(n))
        out[i] = -ic_statistic(p, t.L_single, t.kappa) / log_term
    return out


def calibrate_ci_constants(
    ns=(500, 1000),
    deltas=(1.0, 2.0, 4.0),
    fracs=(0.1, 0.3, 0.5),
    alphas=(0.05, 0.1),
    reps: int = 1000,
    seed: int = 7,
    c_test_floor: float = 0.1,
    write: bool = False,
) -> dict:
    """Monte-Carlo constants of the single change-point confidence interval.

    ``c_test`` is the largest, over ``ns`` and ``alphas``, null
    ``(1 - alpha)``-quantile of ``-T_IC / log(e / alpha)``, floored at
    ``c_test_floor``: under no change the interval is informative with
    probability at most ``alpha``.  ``c_width`` is the largest, over the
    grid of lengths, heights, positions and levels, ``(1 - alpha)``-quantile
    of ``|tau_hat - tau*| delta_hat^2 / log(e / alpha)``, which makes the
    interval cover in every cell.  Informative-or-not is ignored for
    ``c_width`` (conservative).  With ``write`` the package defaults file is
    updated.
    """
    t = Tuning()
    c_test = c_test_floor
    for n in ns:
        for a in alphas:
            v = _null_tic(n, reps, seed, a, t)
            c_test = max(c_test, float(np.quantile(v, 1 - a, method="higher")))
    c_width = 0.0
    cells = {}
    for n in ns:
        for d in deltas:
            for f in fracs:
                for a in alphas:
                    r = _ci_stats(n, d, f, reps, seed + 1, a, t)
                    qv = float(np.quantile(r, 1 - a, method="higher"))
                    cells[f"n={n},delta={d},frac={f},alpha={a}"] = qv
                    c_width = max(c_width, qv)
    res = {"c_width": c_width, "c_test": c_test, "cells": cells, "reps": reps, "seed": seed}
    if write:
        from importlib import resources

        path = Path(str(resources.files("cpdetect").joinpath("data/defaults.json")))
        data = json.loads(path.read_text())
        data["single"]["c_width"] = round(c_width, 4)
        data["single"]["c_test"] = round(c_test, 4)
        path.write_text(json.dumps(data, indent=2) + "\n")
        defaults.cache_clear()
    return res


def load_scenarios(path) -> list[ScenarioSpec]:
    """Scenarios from a JSON file holding one object or a list of them."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("scenarios", [data])
    return [ScenarioSpec.from_dict(d) for d in data]


def write_reports_json(reports, path, timings: bool = True):
    Path(path).write_text(
        json.dumps([r.to_dict(timings) for r in reports], indent=2, sort_keys=True) + "\n"
    )


def write_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["scenario", "metric", "value", "se"])
        w.writeheader()
        for r in reports:
            w.writerows(r.rows())


def bundled_scenario(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    from importlib import resources

    return Path(str(resources.files("cpdetect").joinpath(f"data/scenarios/{name}.json")))
