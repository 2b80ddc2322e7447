"""Binary and image file formats.

* ``TMX1`` transmission matrices: magic ``b"TMX1"``, six little-endian u32
  values ``M, N, out_h, out_w, in_h, in_w``, then ``M*N`` complex entries as
  interleaved little-endian float64 ``(re, im)`` pairs, row-major.
* 16-bit binary PGM (``P5``) for speckle patterns. Pixel values are linear
  in intensity; the header comment ``# scale=<float>`` gives the intensity
  of one count.
* Plain PBM (``P1``) for binary masks, ``1`` = ON.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

from .fiber_model import TransmissionMatrix, as_mask

TMX_MAGIC = b"TMX1"
_TMX_HEADER = struct.Struct("<4s6I")


def save_tm(path, tm: TransmissionMatrix) -> None:
    header = _TMX_HEADER.pack(
        TMX_MAGIC, tm.m, tm.n, *tm.output_shape, *tm.input_shape
    )
    body = np.ascontiguousarray(tm.entries, dtype="<c16").tobytes()
    Path(path).write_bytes(header + body)


def load_tm(path) -> TransmissionMatrix:
    data = Path(path).read_bytes()
    if len(data) < _TMX_HEADER.size or data[:4] != TMX_MAGIC:
        raise ValueError(f"{path}: not a TMX1 file")
    _, m, n, oh, ow, ih, iw = _TMX_HEADER.unpack_from(data)
    expected = _TMX_HEADER.size + 16 * m * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    entries = np.frombuffer(data, dtype="<c16", offset=_TMX_HEADER.size)
    return TransmissionMatrix(entries.reshape(m, n), (oh, ow), (ih, iw))


def write_pgm(path, pattern, scale=None) -> float:
    """Write a non-negative pattern as a 16-bit PGM and return the scale.

    By default the maximum maps to 65535.
    """
    pattern = np.asarray(pattern, dtype=np.float64)
    if pattern.ndim != 2:
        raise ValueError("PGM patterns must be 2-D")
    if np.any(pattern < 0) or not np.all(np.isfinite(pattern)):
        raise ValueError("PGM patterns must be finite and non-negative")
    if scale is None:
        peak = float(pattern.max())
        scale = peak / 65535.0 if peak > 0 else 1.0
    counts = np.rint(pattern / scale)
    if counts.max() > 65535:
        raise ValueError("scale too small: values exceed 16 bits")
    h, w = pattern.shape
    header = f"P5\n# scale={scale!r}\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + counts.astype(">u2").tobytes())
    return scale


_PGM_RE = re.compile(rb"P5\s+((?:#[^\n]*\n\s*)*)(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(path) -> np.ndarray:
    """Read a PGM written by :func:`write_pgm`, applying its scale."""
    data = Path(path).read_bytes()
    match = _PGM_RE.match(data)
    if match is None:
        raise ValueError(f"{path}: not a binary PGM file")
    comments, w, h, maxval = match.groups()
    w, h, maxval = int(w), int(h), int(maxval)
    scale = 1.0
    found = re.search(rb"#\s*scale=(\S+)", comments)
    if found:
        scale = float(found.group(1))
    dtype = ">u2" if maxval > 255 else "u1"
    raw = np.frombuffer(data, dtype=dtype, offset=match.end(), count=w * h)
    if raw.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return raw.reshape(h, w).astype(np.float64) * scale


def write_pbm(path, mask) -> None:
    mask = as_mask(mask)
    h, w = mask.shape
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in mask)
    Path(path).write_text(f"P1\n{w} {h}\n{rows}\n", encoding="ascii")


def read_pbm(path) -> np.ndarray:
    text = Path(path).read_text(encoding="ascii")
    tokens = []
    for line in text.splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not a plain PBM file")
    w, h = int(tokens[1]), int(tokens[2])
    # plain PBM allows pixels without separating whitespace
    bits = [c for c in "".join(tokens[3:])]
    if len(bits) != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {len(bits)}")
    return as_mask(np.array([int(c) for c in bits]), (h, w))
