"""
Checking the GA against exhaustive search
=========================================

With nine input pixels there are only 512 masks, so every one of them can
be scored. The landscape histogram shows how rare the good masks are.
"""

# %%
import numpy as np

from mmfga import FiberSpec, GaConfig, run, synth_tm
from mmfga.experiments import planted_target
from mmfga.oracle import brute_force_best_mask, near_optimal_count
from mmfga.patterns import checkerboard

tm = synth_tm(FiberSpec(input_shape=(3, 3), output_shape=(8, 8), seed=7))
target = planted_target(tm, checkerboard((3, 3), 1))
report = brute_force_best_mask(tm, target)
print("best cc1", report.best_cc1, "ties", report.ties)
print(report.best_mask)

# %%
for eps in (0.05, 0.2, 0.5):
    print(f"masks within {eps} of the best: {near_optimal_count(report, eps)}")

centres = (report.histogram_edges[:-1] + report.histogram_edges[1:]) / 2
counts = report.histogram_counts.copy()
counts[0] -= report.degenerate_count  # the all-dark mask sits in the lowest bin
busy = counts > 0
print("cc1 range over all masks:", centres[busy].min().round(2), "to", centres[busy].max().round(2))

# %%
result = run(tm, target, GaConfig(max_generations=500, rng_seed=3))
print("GA found", result.best_cc1, "in", result.generations, "generations")
print("same mask:", np.array_equal(result.best_mask, report.best_mask))
