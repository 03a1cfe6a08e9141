"""Detect change-points in a noisy piecewise-constant series.

Run with ``python demos/quickstart.py``.
"""

import numpy as np

from cpdetect import PiecewiseSignal, PrefixSums
from cpdetect.metrics import d_hausdorff
from cpdetect.postproc import detect_full, global_confidence_region
from cpdetect.sim import Tuning, adaptive_estimate, resolve_tuning
from cpdetect.solver import SolverConfig, solve_dp_pruned

n = 1200
truth = PiecewiseSignal.from_lists((301, 601, 901), (0.0, 1.5, -0.5, 1.0), n)
y = truth.values() + np.random.default_rng(1).standard_normal(n)
p = PrefixSums(y)

# calibrated thresholds for this length (cached after the first call)
t = resolve_tuning(Tuning(), n)
print(f"calibrated zeta = {t.zeta:.3f}, q = {t.q:.2g}")

dp = solve_dp_pruned(p, SolverConfig(t.L, t.q))
print("penalised least squares:", dp.taus.tolist(), f"criterion {dp.criterion:.2f}")

lp = detect_full(p, t.zeta)
print("CUSUM post-processing:  ", lp.improved.tolist())
for r in lp.radii:
    print(f"  candidate {r.tau}: radius {r.radius}, interval {r.interval}")
print("global region:", global_confidence_region(p, lp.improved, t.zeta))

est = adaptive_estimate(p, t)
print("adaptive:", est.tolist(), "Hausdorff error", d_hausdorff(est, truth.taus))
