"""Synthetic fibers: random transmission matrices, bending, camera noise and
calibration data."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fiber_model import TransmissionMatrix, forward_intensity_batch
from .io import write_pbm, write_pgm

__all__ = [
    "FiberSpec",
    "BendState",
    "synth_tm",
    "perturb_tm_bend",
    "add_measurement_noise",
    "random_masks",
    "iter_calibration_set",
    "gen_calibration_set",
    "export_calibration_set",
]


@dataclass(frozen=True)
class FiberSpec:
    """Size and seed of a synthetic fiber.

    The defaults are 36x36 input macro-pixels (N = 1296) and a 96x96 camera
    region (M = 9216).
    """

    input_shape: tuple[int, int] = (36, 36)
    output_shape: tuple[int, int] = (96, 96)
    seed: int = 0

    def __post_init__(self):
        for name in ("input_shape", "output_shape"):
            shape = tuple(int(v) for v in getattr(self, name))
            if len(shape) != 2 or min(shape) < 1:
                raise ConfigError(f"{name} must be two positive integers, got {shape}")
            object.__setattr__(self, name, shape)

    @property
    def n_inputs(self) -> int:
        return self.input_shape[0] * self.input_shape[1]

    @property
    def m_outputs(self) -> int:
        return self.output_shape[0] * self.output_shape[1]


@dataclass(frozen=True)
class BendState:
    """Bent version of a fiber.

    `displacement` runs from 0 (the straight fiber described by
    `reference_tm`) to 1 (a fiber with no memory of the straight one).
    """

    displacement: float
    reference_tm: TransmissionMatrix
    perturbation_seed: int = 0


def _gaussian_entries(rng, m, n):
    # circular complex Gaussian with E|t|^2 = 1/n
    scale = np.sqrt(0.5 / n)
    re = rng.standard_normal((m, n))
    im = rng.standard_normal((m, n))
    return (re + 1j * im) * scale


def synth_tm(spec: FiberSpec) -> TransmissionMatrix:
    """I.i.d. circular complex Gaussian matrix with entry variance 1/N."""
    if spec.n_inputs < 1 or spec.m_outputs < 1:
        raise ConfigError("fiber dimensions must be positive")
    rng = np.random.default_rng(spec.seed)
    entries = _gaussian_entries(rng, spec.m_outputs, spec.n_inputs)
    return TransmissionMatrix(entries, spec.output_shape, spec.input_shape)


def perturb_tm_bend(bend: BendState) -> TransmissionMatrix:
    """Matrix of the bent fiber, ``sqrt(1-d) T0 + sqrt(d) R``.

    ``R`` is an independent matrix drawn from the same distribution as a
    synthetic straight fiber, seeded by ``perturbation_seed``. The
    interpolation keeps the expected entry variance constant.
    """
    d = float(bend.displacement)
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"displacement must lie in [0, 1], got {d}")
    t0 = bend.reference_tm
    if d == 0.0:
        return t0
    rng = np.random.default_rng(bend.perturbation_seed)
    fresh = _gaussian_entries(rng, t0.m, t0.n)
    entries = np.sqrt(1.0 - d) * t0.entries + np.sqrt(d) * fresh
    return TransmissionMatrix(
        entries.astype(t0.entries.dtype), t0.output_shape, t0.input_shape
    )


def add_measurement_noise(speckle, relative_sigma: float, rng=None) -> np.ndarray:
    """Multiplicative Gaussian noise, ``max(0, v * (1 + eps))``."""
    if relative_sigma < 0:
        raise ValueError("relative_sigma must be non-negative")
    speckle = np.asarray(speckle, dtype=np.float64)
    if relative_sigma == 0:
        return speckle.copy()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    eps = rng.normal(0.0, relative_sigma, speckle.shape)
    return np.maximum(0.0, speckle * (1.0 + eps))


def random_masks(rng, count: int, shape, on_ratio: float) -> np.ndarray:
    return (rng.random((count, *shape)) < on_ratio).astype(np.uint8)


def iter_calibration_set(tm: TransmissionMatrix, count: int, on_ratio: float = 0.5,
                         seed: int = 0, batch: int = 256):
    """Lazily yield ``(mask, speckle)`` pairs of random calibration masks."""
    if count < 1:
        raise ConfigError("count must be at least 1")
    if not 0.0 <= on_ratio <= 1.0:
        raise ConfigError("on_ratio must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    done = 0
    while done < count:
        k = min(batch, count - done)
        masks = random_masks(rng, k, tm.input_shape, on_ratio)
        speckles = forward_intensity_batch(tm, masks)
        for mask, speckle in zip(masks, speckles):
            yield mask, speckle.reshape(tm.output_shape)
        done += k


def gen_calibration_set(tm: TransmissionMatrix, count: int, on_ratio: float = 0.5,
                        seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random masks at `on_ratio` paired with their speckles."""
    return list(iter_calibration_set(tm, count, on_ratio, seed))


def export_calibration_set(directory, tm: TransmissionMatrix, count: int,
                           on_ratio: float = 0.5, seed: int = 0) -> Path:
    """Write a calibration set as PBM masks, PGM speckles and ``index.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = len(str(count - 1))
    with open(directory / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mask_file", "speckle_file", "seed"])
        for i, (mask, speckle) in enumerate(
            iter_calibration_set(tm, count, on_ratio, seed)
        ):
            mask_file = f"mask_{i:0{width}d}.pbm"
            speckle_file = f"speckle_{i:0{width}d}.pgm"
            write_pbm(directory / mask_file, mask)
            write_pgm(directory / speckle_file, speckle)
            writer.writerow([mask_file, speckle_file, seed])
    return directory
