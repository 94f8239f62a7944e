"""Portable graymap (PGM) export of dB-scaled magnitude matrices."""

from __future__ import annotations

import numpy as np


def to_gray_u8(magnitudes: np.ndarray, dynamic_range_db: float) -> np.ndarray:
    """Map linear magnitudes to 8-bit gray, dynamic_range_db below the peak.

    The matrix peak maps to 255; anything dynamic_range_db below it (or an
    all-zero input) maps to 0.
    """
    if dynamic_range_db <= 0:
        raise ValueError("dynamic_range_db must be > 0")
    mag = np.asarray(magnitudes, dtype=float)
    peak = mag.max(initial=0.0)
    if peak <= 0.0:
        return np.zeros(mag.shape, dtype=np.uint8)
    floor = peak * 10.0 ** (-dynamic_range_db / 20.0)
    db = 20.0 * np.log10(np.maximum(mag, floor) / peak)
    scaled = (db + dynamic_range_db) / dynamic_range_db
    return np.round(scaled * 255.0).astype(np.uint8)


def write_pgm(path, gray: np.ndarray) -> None:
    """Write an 8-bit grayscale matrix as a binary (P5) PGM, row-major."""
    img = np.asarray(gray)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("expected a 2-D uint8 array")
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
