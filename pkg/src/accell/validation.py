"""Input validation helpers shared across the pipeline.

These mirror the role of ``check_array`` in scikit-learn: normalize the
input to a canonical ndarray form and fail early with a clear error.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidImage, ShapeError


def check_gray_image(image) -> np.ndarray:
    """Validate and return an 8-bit grayscale image as a 2-D uint8 array.

    Accepts any array-like of integers in [0, 255]. Raises
    :class:`InvalidImage` for empty input, wrong dimensionality, or
    out-of-range values.
    """
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InvalidImage(f"expected a 2-D grayscale raster, got ndim={arr.ndim}")
    if arr.size == 0:
        raise InvalidImage("empty image")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise InvalidImage(f"expected integer intensities, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise InvalidImage("intensities outside [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_binary_mask(mask, shape=None) -> np.ndarray:
    """Validate and return a binary mask as a 2-D bool array.

    If ``shape`` is given, the mask must match it exactly.
    """
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D mask, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ShapeError("empty mask")
    if arr.dtype != bool:
        arr = arr.astype(bool)
    if shape is not None and arr.shape != tuple(shape):
        raise ShapeError(f"mask shape {arr.shape} does not match expected {tuple(shape)}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def check_point_in_bounds(point, shape) -> tuple[int, int]:
    """Validate an integer (row, col) point against an image shape."""
    row, col = int(point[0]), int(point[1])
    h, w = shape
    if not (0 <= row < h and 0 <= col < w):
        raise ShapeError(f"point ({row}, {col}) outside {h}x{w} raster")
    return row, col


def round_half_up(x) -> np.ndarray:
    """Round to the nearest integer, with .5 always rounding up.

    Used everywhere a fractional coordinate becomes a pixel index so
    prompt placement and box centering share one rounding convention.
    """
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)
