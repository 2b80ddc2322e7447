"""Planted retrieval problems and bending sweeps built from the pieces above."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fiber_model import TransmissionMatrix, as_mask, forward_intensity
from .fibersim import BendState, add_measurement_noise, perturb_tm_bend
from .ga import GaConfig, RunResult, run


def planted_target(tm: TransmissionMatrix, mask, noise_sigma: float = 0.0,
                   noise_seed=None) -> np.ndarray:
    """Speckle a known mask produces, optionally with camera noise."""
    target = forward_intensity(tm, as_mask(mask, tm.input_shape))
    if noise_sigma:
        target = add_measurement_noise(target, noise_sigma, noise_seed)
    return target


@dataclass
class SweepPoint:
    displacement: float
    final_cc1: float
    final_cc2: float
    result: RunResult


def bend_sweep(tm: TransmissionMatrix, ground_truth, displacements, cfg: GaConfig,
               bend_seed: int = 0, noise_sigma: float = 0.0, noise_seed=None,
               callback=None) -> list[SweepPoint]:
    """Retrieve through a bent fiber using the straight-fiber matrix.

    For every displacement the target speckle is produced by the bent
    matrix, while the GA keeps modelling the fiber with `tm`. All
    displacements share `bend_seed`, so they lie on one bending path, and
    `cfg`, so the ``d = 0`` point equals a plain retrieval.
    """
    displacements = [float(d) for d in displacements]
    if not displacements:
        raise ConfigError("bend sweep needs at least one displacement")
    gt = as_mask(ground_truth, tm.input_shape)
    points = []
    for d in displacements:
        bent = perturb_tm_bend(BendState(d, tm, bend_seed))
        target = planted_target(bent, gt, noise_sigma, noise_seed)
        result = run(tm, target, cfg, gt)
        points.append(SweepPoint(d, result.best_cc1, result.best_cc2, result))
        if callback is not None:
            callback(points[-1])
    return points
