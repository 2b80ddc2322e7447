"""Built-in binary test images."""

import numpy as np

from .errors import ConfigError


def letter_z(shape=(12, 12)) -> np.ndarray:
    """A block capital Z: top and bottom bars joined by a rising diagonal."""
    h, w = shape
    if h < 5 or w < 5:
        raise ConfigError("letter-Z needs at least a 5x5 grid")
    margin = max(1, round(min(h, w) / 12))
    thick = max(1, round(min(h, w) / 8))
    img = np.zeros((h, w), dtype=np.uint8)
    top, bottom = margin, h - margin - thick
    left, right = margin, w - margin
    img[top : top + thick, left:right] = 1
    img[bottom : bottom + thick, left:right] = 1
    for r in range(top + thick, bottom):
        # column of the diagonal falls from right to left as rows go down
        frac = (r - top - thick) / max(1, bottom - 1 - top - thick)
        c = int(round((right - thick) - frac * (right - thick - left)))
        img[r, max(left, c) : min(right, c + thick)] = 1
    return img


def checkerboard(shape=(12, 12), square=2) -> np.ndarray:
    rows, cols = np.indices(shape)
    return (((rows // square) + (cols // square)) % 2).astype(np.uint8)


def single_pixel(shape=(12, 12), position=None) -> np.ndarray:
    img = np.zeros(shape, dtype=np.uint8)
    if position is None:
        position = (shape[0] // 2, shape[1] // 2)
    img[position] = 1
    return img


BUILTIN_PATTERNS = {
    "letter-Z": letter_z,
    "checkerboard": checkerboard,
    "single-pixel": single_pixel,
}


def builtin_pattern(name: str, shape) -> np.ndarray:
    try:
        factory = BUILTIN_PATTERNS[name]
    except KeyError:
        raise ConfigError(
            f"unknown pattern {name!r}; choose from {sorted(BUILTIN_PATTERNS)}"
        ) from None
    return factory(tuple(shape))
