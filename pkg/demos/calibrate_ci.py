"""Recompute the confidence-interval constants shipped with the package.

``python demos/calibrate_ci.py --write`` updates ``data/defaults.json``.
Takes a few minutes.
"""

import sys

from cpdetect.sim import calibrate_ci_constants

res = calibrate_ci_constants(reps=1000, seed=7, write="--write" in sys.argv)
print(f"c_width = {res['c_width']:.4f}")
print(f"c_test  = {res['c_test']:.4f}")
worst = sorted(res["cells"].items(), key=lambda kv: -kv[1])[:5]
for cell, v in worst:
    print(f"  {cell}: {v:.4f}")
