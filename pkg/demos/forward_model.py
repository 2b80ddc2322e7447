"""
Speckle from a binary mask
==========================

A random transmission matrix maps a 12x12 binary mask to a 32x32 speckle.
Masks that differ a little give speckles that still correlate; unrelated
masks give almost uncorrelated speckles.
"""

# %%
import numpy as np

from mmfga import FiberSpec, corr2, forward_intensity, synth_tm
from mmfga.patterns import letter_z

tm = synth_tm(FiberSpec(input_shape=(12, 12), output_shape=(32, 32), seed=1))
mask = letter_z((12, 12))
speckle = forward_intensity(tm, mask)
print("speckle shape", speckle.shape, "mean", speckle.mean().round(3))

# %%
# flip a growing number of pixels and watch the speckle drift away
rng = np.random.default_rng(0)
order = rng.permutation(mask.size)
for flips in (0, 1, 5, 20, 72):
    other = mask.ravel().copy()
    other[order[:flips]] ^= 1
    cc = corr2(forward_intensity(tm, other.reshape(mask.shape)), speckle)
    print(f"{flips:3d} pixels flipped: speckle correlation {cc:.3f}")

# %%
# the score ignores brightness offset and gain
print("corr2 with itself:", corr2(speckle, speckle))
print("corr2 with an affine copy:", corr2(speckle, 3 * speckle + 2))
