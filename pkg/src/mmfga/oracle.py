"""Exhaustive search over every binary mask of a small instance.

Masks are enumerated as integers ``0 .. 2**N - 1``; bit ``n`` of the integer
is pixel ``n`` of the row-major mask. Evaluation streams through the range
in chunks and keeps only a histogram and the running best, so memory does
not grow with ``2**N``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CapacityError, ShapeError
from .fiber_model import TargetCorrelator, TransmissionMatrix, forward_intensity_batch

__all__ = [
    "MAX_ORACLE_INPUTS",
    "LandscapeReport",
    "mask_from_index",
    "brute_force_best_mask",
    "near_optimal_count",
]

MAX_ORACLE_INPUTS = 24
TIE_TOLERANCE = 1e-12
HISTOGRAM_EDGES = np.linspace(-1.0, 1.0, 201)
_CHUNK = 4096


@dataclass
class LandscapeReport:
    """Result of enumerating all ``2**n`` masks.

    Degenerate masks (constant speckle) are excluded from the argmax and
    counted in ``degenerate_count``; in the histogram they sit in the
    lowest bin, scored -1 as the GA scores them, so the histogram always
    holds ``2**n`` masks. ``ties`` counts masks within 1e-12 of
    ``best_cc1``, the best mask included.
    """

    n: int
    best_mask: np.ndarray
    best_cc1: float
    ties: int
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    degenerate_count: int
    _source: Optional[tuple] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "best_mask_bits": [int(b) for b in self.best_mask.reshape(-1)],
            "best_cc1": self.best_cc1,
            "ties": self.ties,
            "histogram_edges": [float(e) for e in self.histogram_edges],
            "histogram_counts": [int(c) for c in self.histogram_counts],
            "degenerate_count": self.degenerate_count,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict, mask_shape=None) -> "LandscapeReport":
        bits = np.array(d["best_mask_bits"], dtype=np.uint8)
        if mask_shape is not None:
            bits = bits.reshape(mask_shape)
        return cls(
            d["n"],
            bits,
            d["best_cc1"],
            d["ties"],
            np.array(d["histogram_edges"]),
            np.array(d["histogram_counts"], dtype=np.int64),
            d["degenerate_count"],
        )


def mask_from_index(index, shape) -> np.ndarray:
    """Masks for one or more enumeration indices."""
    n = shape[0] * shape[1]
    index = np.asarray(index, dtype=np.int64)
    bits = (index[..., None] >> np.arange(n, dtype=np.int64)) & 1
    return bits.astype(np.uint8).reshape(*index.shape, *shape)


def _enumerate(tm, target):
    """Yield ``(indices, cc1, degenerate)`` for consecutive mask chunks."""
    correlate = TargetCorrelator(target)
    total = 1 << tm.n
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        masks = mask_from_index(idx, tm.input_shape)
        r, degenerate = correlate(forward_intensity_batch(tm, masks))
        yield idx, r, degenerate


def _check(tm: TransmissionMatrix, target):
    if tm.n > MAX_ORACLE_INPUTS:
        raise CapacityError(
            f"exhaustive search is capped at N={MAX_ORACLE_INPUTS} inputs "
            f"(2**{MAX_ORACLE_INPUTS} masks); this matrix has N={tm.n}. "
            "Use a smaller input grid."
        )
    target = np.asarray(target, dtype=np.float64)
    if target.shape != tm.output_shape:
        raise ShapeError(
            f"target shape {target.shape} does not match output shape {tm.output_shape}"
        )
    return target


def brute_force_best_mask(tm: TransmissionMatrix, target) -> LandscapeReport:
    """Evaluate CC1 for every binary mask and report the landscape.

    Raises
    ------
    CapacityError
        If the matrix has more than 24 inputs.
    """
    target = _check(tm, target)
    counts = np.zeros(len(HISTOGRAM_EDGES) - 1, dtype=np.int64)
    best_cc1 = -np.inf
    best_index = -1
    near = np.zeros(0)
    degenerate_count = 0
    for idx, r, degenerate in _enumerate(tm, target):
        degenerate_count += int(degenerate.sum())
        scored = np.where(degenerate, -1.0, r)
        counts += np.histogram(scored, HISTOGRAM_EDGES)[0]
        valid = ~degenerate
        if not valid.any():
            continue
        r_valid = r[valid]
        k = int(np.argmax(r_valid))
        if r_valid[k] > best_cc1:
            best_cc1 = float(r_valid[k])
            best_index = int(idx[valid][k])
        # values near the running best; pruned as the best rises
        near = np.concatenate([near, r_valid[r_valid >= best_cc1 - TIE_TOLERANCE]])
        near = near[near >= best_cc1 - TIE_TOLERANCE]
    if best_index < 0:
        best_mask = np.zeros(tm.input_shape, dtype=np.uint8)
        best_cc1 = float("nan")
    else:
        best_mask = mask_from_index(best_index, tm.input_shape)
    return LandscapeReport(
        tm.n,
        best_mask,
        best_cc1,
        len(near),
        HISTOGRAM_EDGES.copy(),
        counts,
        degenerate_count,
        _source=(tm, target),
    )


def near_optimal_count(report: LandscapeReport, epsilon: float) -> int:
    """Number of non-degenerate masks with CC1 >= best_cc1 - epsilon.

    Re-enumerates the instance the report came from, so it is exact. The
    tie tolerance of 1e-12 applies, making ``epsilon = 0`` equal to
    ``report.ties``.
    """
    if report._source is None:
        raise ValueError("report has no attached instance; it was loaded from JSON")
    tm, target = report._source
    threshold = report.best_cc1 - epsilon - TIE_TOLERANCE
    count = 0
    for _, r, degenerate in _enumerate(tm, target):
        count += int(np.sum(r[~degenerate] >= threshold))
    return count
