"""
Bayesian optimization of the Branin function
============================================

Quantum-kernel surrogates (exact and 10,000-shot) against an RBF GP and
random search, all starting from the same five random points. A short
version of the full benchmark; pass a repetition count to run more:
``python demos/branin_bo.py 25``.
"""

# %%
import sys

from qgpbo import experiments
from qgpbo.bayesopt import BRANIN_MINIMUM

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 3
cfg = experiments.resolve_config("bayesopt", {"repetitions": reps, "n_iter": 30})
runs = experiments.run_benchmark_bo(cfg)

# %%
# Best observation so far, averaged over runs. Observations carry noise with
# standard deviation 0.5, so the best noisy value can dip below the true
# minimum.
print(f"true minimum {BRANIN_MINIMUM:.4f}")
print("eval " + "".join(f"{name:>13s}" for name in runs))
curves = {name: experiments.aggregate(traces)[0] for name, traces in runs.items()}
for i in (0, 4, 9, 19, 34):
    print(f"{i + 1:4d} " + "".join(f"{curves[name][i]:13.3f}" for name in runs))

# %%
# Where did each run end up? Branin has three global minimizers.
for name, traces in runs.items():
    best = [t.points[t.observations.argmin()].round(2).tolist() for t in traces]
    print(name, best)
