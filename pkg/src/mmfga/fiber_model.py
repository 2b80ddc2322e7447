"""Transmission-matrix forward model and the 2-D correlation coefficient.

Masks are 2-D ``uint8`` arrays of 0/1 values (1 = micro-mirror ON), fields
are 2-D complex arrays and speckle patterns are 2-D non-negative float
arrays, all shaped like the input or output grid of the matrix they belong
to. Every pixel grid is stored row-major, so a pattern of shape ``(h, w)``
is indexed as the flat vector ``pattern.reshape(-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateVarianceError, ShapeError

__all__ = [
    "TransmissionMatrix",
    "as_mask",
    "forward_field",
    "intensity",
    "forward_intensity",
    "forward_intensity_batch",
    "corr2",
    "corr2_batch",
    "TargetCorrelator",
]


def _shape2(shape) -> tuple[int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 2 or min(shape) < 1:
        raise ShapeError(f"expected a 2-D grid shape, got {shape}")
    return shape


@dataclass(frozen=True)
class TransmissionMatrix:
    """Complex M x N matrix mapping input pixels to output field pixels.

    Parameters
    ----------
    entries : ndarray, shape (M, N)
        Complex coefficients; row ``m`` holds the contributions of every
        input pixel to output pixel ``m``. ``complex128`` unless single
        precision is requested explicitly with :meth:`astype`.
    output_shape : tuple of int
        ``(height, width)`` of the output grid, ``height * width == M``.
    input_shape : tuple of int
        ``(height, width)`` of the input grid, ``height * width == N``.
    """

    entries: np.ndarray
    output_shape: tuple[int, int]
    input_shape: tuple[int, int]

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.dtype not in (np.complex128, np.complex64):
            entries = entries.astype(np.complex128)
        if entries.ndim != 2:
            raise ShapeError(f"entries must be 2-D, got ndim={entries.ndim}")
        out_shape = _shape2(self.output_shape)
        in_shape = _shape2(self.input_shape)
        if out_shape[0] * out_shape[1] != entries.shape[0]:
            raise ShapeError(
                f"output_shape {out_shape} does not match M={entries.shape[0]}"
            )
        if in_shape[0] * in_shape[1] != entries.shape[1]:
            raise ShapeError(
                f"input_shape {in_shape} does not match N={entries.shape[1]}"
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("transmission matrix contains NaN or Inf")
        entries = np.array(entries, copy=True)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "output_shape", out_shape)
        object.__setattr__(self, "input_shape", in_shape)

    @classmethod
    def from_array(cls, entries, output_shape=None, input_shape=None):
        """Wrap a bare matrix, treating missing grid shapes as ``(1, n)``."""
        entries = np.asarray(entries)
        if output_shape is None:
            output_shape = (1, entries.shape[0])
        if input_shape is None:
            input_shape = (1, entries.shape[1])
        return cls(entries, output_shape, input_shape)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def real_dtype(self):
        return self.entries.real.dtype

    def astype(self, dtype) -> "TransmissionMatrix":
        """Copy with entries cast to ``complex64`` or ``complex128``."""
        return TransmissionMatrix(
            self.entries.astype(dtype), self.output_shape, self.input_shape
        )

    @cached_property
    def _stacked(self) -> np.ndarray:
        # (N, 2M): real parts then imaginary parts, one real GEMM per batch
        t = self.entries
        return np.ascontiguousarray(np.concatenate([t.real.T, t.imag.T], axis=1))

    def __eq__(self, other):
        if not isinstance(other, TransmissionMatrix):
            return NotImplemented
        return (
            self.output_shape == other.output_shape
            and self.input_shape == other.input_shape
            and np.array_equal(self.entries, other.entries)
        )

    __hash__ = None


def as_mask(mask, shape=None) -> np.ndarray:
    """Validate a binary mask and return it as a 2-D ``uint8`` array.

    A 1-D input is accepted when `shape` is given and is reshaped row-major.
    """
    arr = np.asarray(mask)
    if shape is not None:
        shape = _shape2(shape)
        if arr.size != shape[0] * shape[1]:
            raise ShapeError(f"mask with {arr.size} pixels does not fit {shape}")
        arr = arr.reshape(shape)
    if arr.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got ndim={arr.ndim}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask values must be exactly 0 or 1")
    return arr.astype(np.uint8)


def _check_masks(tm: TransmissionMatrix, masks: np.ndarray) -> np.ndarray:
    flat = masks.reshape(masks.shape[0], -1)
    if flat.shape[1] != tm.n:
        raise ShapeError(
            f"mask has {flat.shape[1]} pixels but the matrix has N={tm.n} inputs"
        )
    return flat


def _field_parts(tm: TransmissionMatrix, flat_masks: np.ndarray):
    """Real and imaginary output fields for a stack of flat masks."""
    w = tm._stacked
    x = flat_masks.astype(w.dtype, copy=False)
    single = x.shape[0] == 1
    if single:
        # one-row matmul dispatches to gemv, whose summation order differs
        # from gemm; padding keeps single and batched results bitwise equal
        x = np.concatenate([x, np.zeros_like(x)])
    f = x @ w
    if single:
        f = f[:1]
    return f[:, : tm.m], f[:, tm.m :]


def forward_field(tm: TransmissionMatrix, mask) -> np.ndarray:
    """Output field of a binary mask, ``E_m = sum_n t_mn * mask_n``.

    Returns a complex array of shape ``tm.output_shape``.
    """
    mask = np.asarray(mask)
    flat = _check_masks(tm, mask.reshape(1, -1))
    re, im = _field_parts(tm, flat)
    return (re[0] + 1j * im[0]).reshape(tm.output_shape)


def intensity(field) -> np.ndarray:
    """Squared modulus of a complex field."""
    field = np.asarray(field)
    if not np.iscomplexobj(field):
        return field * field
    return field.real * field.real + field.imag * field.imag


def forward_intensity(tm: TransmissionMatrix, mask) -> np.ndarray:
    """Speckle intensity ``|sum_n t_mn mask_n|**2`` of one mask."""
    return intensity(forward_field(tm, mask))


def forward_intensity_batch(tm: TransmissionMatrix, masks) -> np.ndarray:
    """Speckle intensities for a stack of masks.

    Parameters
    ----------
    tm : TransmissionMatrix
    masks : array_like, shape (P, h, w) or (P, N)

    Returns
    -------
    ndarray, shape (P, M)
        Flat intensities; row ``p`` is bitwise equal to
        ``forward_intensity(tm, masks[p]).ravel()``.
    """
    masks = np.asarray(masks)
    flat = _check_masks(tm, masks)
    if flat.shape[0] == 0:
        return np.zeros((0, tm.m), dtype=tm.real_dtype)
    re, im = _field_parts(tm, flat)
    return re * re + im * im


def _center_rows(rows: np.ndarray):
    mean = rows.sum(axis=1, keepdims=True) / rows.shape[1]
    centered = rows - mean
    return centered, (centered * centered).sum(axis=1)


def _constant_rows(rows: np.ndarray) -> np.ndarray:
    return rows.max(axis=1) == rows.min(axis=1)


def _pearson(centered, ss, ref_centered, ref_ss):
    num = (centered * ref_centered).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / np.sqrt(ss * ref_ss)
    return np.clip(r, -1.0, 1.0)


def corr2(a, b) -> float:
    """Pearson correlation coefficient of two equally shaped patterns.

    Works on any shape; the arrays are compared element by element, so the
    result does not depend on how the pixels are laid out.

    Raises
    ------
    ShapeError
        If the shapes differ or there are fewer than two elements.
    DegenerateVarianceError
        If either input is constant.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ShapeError("corr2 needs at least two elements")
    ra = a.reshape(1, -1)
    rb = b.reshape(1, -1)
    if _constant_rows(ra)[0] or _constant_rows(rb)[0]:
        raise DegenerateVarianceError("corr2 input has zero variance")
    ca, ssa = _center_rows(ra)
    cb, ssb = _center_rows(rb)
    return float(_pearson(ca, ssa, cb[0], ssb[0])[0])


class TargetCorrelator:
    """Correlate many patterns against one fixed reference pattern.

    The reference is centered once. Results are bitwise equal to calling
    :func:`corr2` on each row separately.
    """

    def __init__(self, target):
        target = np.asarray(target, dtype=np.float64)
        row = target.reshape(1, -1)
        if row.shape[1] < 2:
            raise ShapeError("target needs at least two elements")
        if _constant_rows(row)[0]:
            raise DegenerateVarianceError("target pattern has zero variance")
        self.shape = target.shape
        self.size = row.shape[1]
        centered, ss = _center_rows(row)
        self._centered = centered[0]
        self._ss = ss[0]

    def __call__(self, rows) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(r, degenerate)`` for a ``(P, size)`` stack of patterns.

        Constant rows get ``r = nan`` and ``degenerate = True``.
        """
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, self.size)
        degenerate = _constant_rows(rows)
        centered, ss = _center_rows(rows)
        r = _pearson(centered, ss, self._centered, self._ss)
        r[degenerate] = np.nan
        return r, degenerate


def corr2_batch(rows, target) -> np.ndarray:
    """Correlation of every row of `rows` with `target`; nan where constant."""
    return TargetCorrelator(target)(rows)[0]
