"""
Retrieving through a bent fiber
===============================

Bending changes the fiber's transmission matrix, but the retrieval keeps
using the matrix measured on the straight fiber. The further the fiber
moves, the worse the match.
"""

# %%
from pathlib import Path

import numpy as np

from mmfga import FiberSpec, GaConfig, synth_tm
from mmfga.experiments import bend_sweep
from mmfga.patterns import letter_z
from mmfga.plotting import plot_sweep

ds = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
truth = letter_z((12, 12))
cc1 = np.zeros(len(ds))
cc2 = np.zeros(len(ds))
seeds = range(3)
for seed in seeds:
    tm = synth_tm(FiberSpec(input_shape=(12, 12), output_shape=(16, 16), seed=seed))
    points = bend_sweep(tm, truth, ds, GaConfig(max_generations=2000, rng_seed=seed),
                        bend_seed=500 + seed)
    cc1 += [p.final_cc1 for p in points]
    cc2 += [p.final_cc2 for p in points]
cc1 /= len(seeds)
cc2 /= len(seeds)

# %%
for d, a, b in zip(ds, cc1, cc2):
    print(f"d={d:.1f}  cc1={a:.3f}  cc2={b:.3f}")

Path("demo-out").mkdir(exist_ok=True)
plot_sweep(ds, cc1, cc2, "demo-out/bend_sweep.svg")
