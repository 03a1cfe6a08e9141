"""Wall-clock scaling of the exact programme and of the full CUSUM procedure.

Prints a CSV with one row per (n, procedure).  The same table is available
from ``cpdetect bench``.
"""

import sys
import time

import numpy as np

from cpdetect import PrefixSums
from cpdetect.postproc import detect_full
from cpdetect.solver import SolverConfig, solve_dp, solve_dp_pruned

procs = {
    "dp": lambda p: solve_dp(p, SolverConfig(2.0, 1.0)),
    "dp-pruned": lambda p: solve_dp_pruned(p, SolverConfig(2.0, 1.0)),
    "lp-full": lambda p: detect_full(p, 2.0),
}

print("n,procedure,seconds")
ns = [int(a) for a in sys.argv[1:]] or [2**11, 2**12, 2**13, 2**14]
for n in ns:
    x = np.arange(n)
    y = np.sign(np.sin(2 * np.pi * 8 * x / n)) + np.random.default_rng(n).standard_normal(n)
    p = PrefixSums(y)
    for name, fn in procs.items():
        fn(PrefixSums(y[:32]))  # compile
        start = time.perf_counter()
        fn(p)
        print(f"{n},{name},{time.perf_counter() - start:.4f}")
