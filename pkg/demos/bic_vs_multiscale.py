"""Compare the multiscale penalty with a BIC-type penalty.

Four equispaced jumps with energy a few times the multiscale detection
threshold: the multiscale criterion finds them, the BIC penalty, whose
per-change charge grows like log n, mostly does not.
"""

import math

from cpdetect.sim import ScenarioSpec, Tuning, run_scenario

n, K, reps = 4096, 4, 100
ell = n / (K + 1)
threshold = math.sqrt(2 * math.log(2 * n / ell))

print("energy/threshold  multiscale  bic")
for mult in (1.0, 2.0, 3.0, 5.0):
    height = mult * threshold / math.sqrt(ell / 2)
    rates = []
    for proc in ("dp-pruned", "bic"):
        spec = ScenarioSpec(n=n, K=K, height=height, replicates=reps, seed=1, procedure=proc, tuning=Tuning(L=2.0))
        rates.append(run_scenario(spec).rate("all_hit"))
    print(f"{mult:16.1f}  {rates[0]:10.2f}  {rates[1]:.2f}")
