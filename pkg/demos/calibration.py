"""
A calibration set on disk
=========================

Random half-on masks and the speckles they produce, the kind of data used
to measure a transmission matrix in the lab, written as PBM/PGM pairs.
"""

# %%
import csv

from mmfga import FiberSpec, synth_tm
from mmfga.fibersim import export_calibration_set
from mmfga.io import read_pbm, read_pgm

tm = synth_tm(FiberSpec(input_shape=(12, 12), output_shape=(32, 32), seed=0))
folder = export_calibration_set("demo-out/calibration", tm, count=20, on_ratio=0.5, seed=4)

with open(folder / "index.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
print(len(rows), "pairs in", folder)

first = rows[0]
mask = read_pbm(folder / first["mask_file"])
speckle = read_pgm(folder / first["speckle_file"])
print("ON fraction", mask.mean().round(3), "speckle peak", speckle.max().round(3))
