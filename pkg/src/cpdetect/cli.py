"""``cpdetect`` command line.

Positions in every output are 1-based and mark the first observation of a
new segment.  Exit codes: 0 success, 2 unreadable or unparsable input,
3 invalid tuning.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import MODES, calibrate_q, calibrate_zeta
from .core import ChangePointVector, PrefixSums
from .postproc import detect_full, postprocess
from .sim import (
    Tuning,
    bundled_scenario,
    estimate_sigma,
    load_scenarios,
    resolve_tuning,
    run_scenario,
    write_reports_csv,
    write_reports_json,
)
from .single import confidence_interval_single, detect_single, estimate_single
from .solver import SolverConfig, solve_bic, solve_dp, solve_dp_pruned

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TUNING = 3

DETECT_PROCEDURES = ("adaptive", "dp", "dp-pruned", "lp-full", "lp-dp", "bic")


class InputError(Exception):
    """Unreadable or unparsable input."""


class TuningError(Exception):
    """Tuning outside its domain."""


def read_series(path, column: int | None = None, header: bool = False, delimiter: str = ",") -> np.ndarray:
    """Numeric series from a text file, one value per line or column ``column`` (1-based)."""
    try:
        text = Path(path).read_text(encoding="utf-8") if path != "-" else sys.stdin.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from e
    values = []
    rows = csv.reader(io.StringIO(text), delimiter=delimiter)
    for lineno, row in enumerate(rows, start=1):
        if header and lineno == 1:
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if column is None:
            if len(row) != 1:
                raise InputError(f"line {lineno}: expected one value, got {len(row)}; use --column")
            cell = row[0]
        else:
            if column > len(row):
                raise InputError(f"line {lineno}: no column {column}")
            cell = row[column - 1]
        try:
            v = float(cell)
        except ValueError:
            raise InputError(f"line {lineno}: cannot parse {cell.strip()!r} as a number") from None
        if not math.isfinite(v):
            raise InputError(f"line {lineno}: non-finite value {cell.strip()!r}")
        values.append(v)
    if len(values) < 2:
        raise InputError(f"{path}: need at least 2 values, got {len(values)}")
    return np.asarray(values)


def _emit(obj, args, csv_rows=None, csv_fields=None):
    if args.format == "csv" and csv_rows is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=csv_fields, lineterminator="\n")
        w.writeheader()
        w.writerows(csv_rows)
        text = buf.getvalue()
    else:
        text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(x):
    return None if x is None or (isinstance(x, float) and math.isinf(x)) else x


def _load(args) -> np.ndarray:
    return read_series(args.input, args.column, args.header, args.delimiter)


def _scale(y: np.ndarray, sigma: str) -> float:
    if sigma == "auto":
        try:
            return estimate_sigma(y)
        except ValueError as e:
            raise InputError(str(e)) from e
    try:
        s = float(sigma)
    except ValueError:
        raise TuningError(f"--sigma must be 'auto' or a positive number, got {sigma!r}") from None
    if not s > 0:
        raise TuningError(f"--sigma must be positive, got {s}")
    return s


def _tuning(args) -> Tuning:
    try:
        return Tuning(
            L=args.L,
            q=args.q,
            alpha=args.alpha,
            L_single=args.L_single,
            kappa=args.kappa,
            zeta="calibrate" if args.zeta is None else args.zeta,
            dyadic=args.dyadic,
            multi=args.multi,
        )
    except ValueError as e:
        raise TuningError(str(e)) from e


def cmd_detect(args) -> int:
    y = _load(args)
    if np.all(y == y[0]):
        sigma = 1.0
    else:
        sigma = _scale(y, args.sigma)
    p = PrefixSums(y / sigma)
    t = _tuning(args)
    proc = args.procedure
    out = {"n": p.n, "procedure": proc, "sigma": sigma}
    radii = []
    if proc in ("dp", "dp-pruned", "bic"):
        if proc == "bic":
            res = solve_bic(p, t.L)
        else:
            t = resolve_tuning(t, p.n, args.threads, need_q=True, need_zeta=False)
            cfg = SolverConfig(t.L, t.q, args.max_changes)
            res = (solve_dp if proc == "dp" else solve_dp_pruned)(p, cfg)
        est = res.taus
        out["criterion"] = res.criterion
    else:
        multi = proc if proc != "adaptive" else t.multi
        t = resolve_tuning(
            t, p.n, args.threads, need_q=multi != "lp-full", need_zeta=multi.startswith("lp")
        )
        if multi == "lp-full":
            rep = detect_full(p, t.zeta, t.dyadic)
        elif multi == "lp-dp":
            base = solve_dp_pruned(p, SolverConfig(t.L, t.q)).taus
            rep = postprocess(p, base, t.zeta, t.dyadic)
        else:
            rep = None
            solver = solve_dp if multi == "dp" else solve_dp_pruned
            est = solver(p, SolverConfig(t.L, t.q)).taus
        if rep is not None:
            est = rep.improved
            out["candidates"] = rep.pruned.tolist()
            radii = [
                {"tau": r.tau, "radius": _finite(r.radius), "interval": list(r.interval)}
                for r in rep.radii
            ]
        if proc == "adaptive":
            # single change-point rescue when the first stage finds nothing
            out["single_stage"] = False
            if est.K == 0 and detect_single(p, t.L_single, t.alpha).reject:
                est = ChangePointVector(np.array([estimate_single(p, t.L_single)]), p.n)
                out["single_stage"] = True
    out["change_points"] = est.tolist()
    out["radii"] = radii
    out["tuning"] = {k: v for k, v in asdict(t).items()}
    rows = [{"position": x} for x in est.tolist()]
    if radii:
        by_tau = {r["tau"]: r for r in radii}
        order = sorted(by_tau)
        rows = [
            {
                "position": x,
                "radius": by_tau[c]["radius"],
                "lo": by_tau[c]["interval"][0],
                "hi": by_tau[c]["interval"][1],
            }
            for x, c in zip(est.tolist(), order)
        ]
    fields = ["position", "radius", "lo", "hi"] if radii else ["position"]
    _emit(out, args, rows, fields)
    return EXIT_OK


def cmd_test(args) -> int:
    y = _load(args)
    try:
        res = detect_single(y, args.L_single, args.alpha)
    except ValueError as e:
        raise TuningError(str(e)) from e
    d = asdict(res)
    _emit(d, args, [d], list(d))
    return EXIT_OK


def cmd_ci(args) -> int:
    y = _load(args)
    try:
        res = confidence_interval_single(
            y, args.L_single, args.kappa, args.alpha, args.c_width, args.c_test
        )
    except ValueError as e:
        raise TuningError(str(e)) from e
    d = asdict(res)
    d["interval"] = list(res.interval)
    row = {**d, "lo": res.interval[0], "hi": res.interval[1]}
    row.pop("interval")
    _emit(d, args, [row], list(row))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    kinds = ("zeta", "q") if args.kind == "both" else (args.kind,)
    results = []
    for kind in kinds:
        fn = calibrate_zeta if kind == "zeta" else calibrate_q
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = fn(
                    args.n,
                    args.alpha,
                    args.reps,
                    args.seed,
                    args.mode,
                    threads=args.threads,
                    use_cache=not args.no_cache,
                    path=args.cache,
                )
        except ValueError as e:
            raise TuningError(str(e)) from e
        d = asdict(res)
        d.pop("cached")
        results.append(d)
    _emit(results if len(results) > 1 else results[0], args, results, list(results[0]))
    return EXIT_OK


def cmd_simulate(args) -> int:
    path = bundled_scenario(args.bundled) if args.bundled else args.scenario
    if path is None:
        raise InputError("give a scenario file or --bundled NAME")
    try:
        specs = load_scenarios(path)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from e
    except (json.JSONDecodeError, TypeError) as e:
        raise InputError(f"{path}: malformed scenario file: {e}") from e
    except ValueError as e:
        raise TuningError(str(e)) from e
    reports = [run_scenario(s, threads=args.threads) for s in specs]
    if args.json:
        write_reports_json(reports, args.json)
    if args.csv:
        write_reports_csv(reports, args.csv)
    obj = [r.to_dict(timings=False) for r in reports]
    rows = [row for r in reports for row in r.rows()]
    _emit(obj, args, rows, ["scenario", "metric", "value", "se"])
    return EXIT_OK


def _bench_one(proc: str, y: np.ndarray, zeta: float):
    p = PrefixSums(y)
    if proc == "dp":
        solve_dp(p, SolverConfig(2.0, 1.0))
    elif proc == "dp-pruned":
        solve_dp_pruned(p, SolverConfig(2.0, 1.0))
    elif proc == "lp-full":
        detect_full(p, zeta, dyadic=True)
    else:
        raise TuningError(f"unknown benchmark procedure {proc!r}")


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = []
    for proc in args.procedures:
        # compile outside the timed region
        _bench_one(proc, rng.standard_normal(64), args.zeta)
    for n in args.ns:
        y = rng.standard_normal(n)
        for proc in args.procedures:
            best = math.inf
            for _ in range(args.repeats):
                start = time.perf_counter()
                _bench_one(proc, y, args.zeta)
                best = min(best, time.perf_counter() - start)
            rows.append({"n": n, "procedure": proc, "seconds": best})
    args.format = "csv" if args.format is None else args.format
    _emit(rows, args, rows, ["n", "procedure", "seconds"])
    return EXIT_OK


def _add_input(sp):
    sp.add_argument("input", help="CSV file ('-' for stdin)")
    sp.add_argument("--column", type=int, default=None, help="1-based column of a delimited file")
    sp.add_argument("--header", action="store_true", help="skip the first line")
    sp.add_argument("--delimiter", default=",")


def _add_output(sp, default="json"):
    sp.add_argument("--format", choices=("json", "csv"), default=default)
    sp.add_argument("--output", "-o", default=None, help="write here instead of stdout")


def _add_single(sp):
    sp.add_argument("--L-single", dest="L_single", type=float, default=1.5)
    sp.add_argument("--alpha", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpdetect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("detect", help="detect change-points")
    _add_input(sp)
    _add_output(sp)
    _add_single(sp)
    sp.add_argument("--procedure", choices=DETECT_PROCEDURES, default="adaptive")
    sp.add_argument("--multi", choices=("dp", "dp-pruned", "lp-full", "lp-dp"), default="lp-full")
    sp.add_argument("--L", type=float, default=2.0)
    sp.add_argument("--q", type=float, default=None)
    sp.add_argument("--kappa", type=float, default=1.5)
    sp.add_argument("--zeta", type=float, default=None)
    sp.add_argument("--sigma", default="1", help="noise level, or 'auto'")
    sp.add_argument("--max-changes", type=int, default=None)
    sp.add_argument("--dyadic", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--threads", type=int, default=None)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("test", help="test for a single change-point")
    _add_input(sp)
    _add_output(sp)
    _add_single(sp)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("ci", help="confidence interval of a single change-point")
    _add_input(sp)
    _add_output(sp)
    _add_single(sp)
    sp.add_argument("--kappa", type=float, default=1.5)
    sp.add_argument("--c-width", dest="c_width", type=float, default=None)
    sp.add_argument("--c-test", dest="c_test", type=float, default=None)
    sp.set_defaults(func=cmd_ci)

    sp = sub.add_parser("calibrate", help="Monte-Carlo thresholds")
    _add_output(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=MODES, default="full")
    sp.add_argument("--kind", choices=("zeta", "q", "both"), default="both")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--cache", default=None, help="cache file (default: $CPDETECT_CACHE)")
    sp.add_argument("--no-cache", action="store_true")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("simulate", help="run scenario files")
    _add_output(sp)
    sp.add_argument("scenario", nargs="?", default=None, help="JSON scenario file")
    sp.add_argument("--bundled", default=None, help="name of a bundled scenario, e.g. 'null'")
    sp.add_argument("--json", default=None, help="also write the full report here")
    sp.add_argument("--csv", default=None, help="also write one row per metric here")
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="wall-clock timings, plot-ready CSV")
    sp.add_argument("--format", choices=("json", "csv"), default=None)
    sp.add_argument("--output", "-o", default=None)
    sp.add_argument("--ns", type=int, nargs="+", default=[2**12, 2**13, 2**14])
    sp.add_argument(
        "--procedures", nargs="+", default=["dp", "dp-pruned", "lp-full"],
        choices=("dp", "dp-pruned", "lp-full"),
    )
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--zeta", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"cpdetect: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (TuningError, ValueError) as e:
        print(f"cpdetect: invalid tuning: {e}", file=sys.stderr)
        return EXIT_TUNING


if __name__ == "__main__":
    sys.exit(main())
