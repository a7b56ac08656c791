"""Automatic intensity thresholds: mean cutoff, iterative intermeans, and
the scaled (adjusted) cutoff used for candidate cell detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateImage, InvalidAlpha, InvalidImage
from .validation import check_gray_image

#: Convergence tolerance in intensity units; half the 8-bit quantization step.
CONVERGENCE_EPS = 0.5
MAX_ITERATIONS = 100


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    iterations: int
    converged: bool


def mean_intensity(image) -> float:
    """Arithmetic mean of all pixel intensities."""
    arr = check_gray_image(image)
    if arr.size == 0:
        raise InvalidImage("empty image")
    return float(arr.mean(dtype=np.float64))


def isodata_threshold(image) -> ThresholdResult:
    """Iterative intermeans threshold (Ridler-Calvard).

    Starting from the mean intensity, the threshold is repeatedly replaced
    by the midpoint of the two class means (low class: intensity <= T, high
    class: intensity > T) until the induced partition stops changing. The
    returned threshold then satisfies T = (mean_low(T) + mean_high(T)) / 2
    exactly, up to floating-point rounding.

    Intensities are 8-bit, so the per-value histogram is an exact
    representation and each iteration costs O(256) after one image pass.

    Raises
    ------
    DegenerateImage
        If the image has a single intensity value (no two classes exist).
    """
    arr = check_gray_image(image)
    hist = np.bincount(arr.ravel(), minlength=256).astype(np.float64)
    values = np.arange(256, dtype=np.float64)
    csum = np.cumsum(hist)
    cval = np.cumsum(hist * values)
    total, total_val = csum[-1], cval[-1]

    nonzero = np.flatnonzero(hist)
    if nonzero.size < 2:
        raise DegenerateImage("image has a single intensity; cannot split into two classes")

    def class_means(t: float) -> tuple[float, float]:
        # Low class takes intensity <= t, consistent with binarize's strict >.
        # For a non-constant image t stays in [min, max), so both classes
        # are always populated.
        k = int(np.floor(t))
        n_low, s_low = csum[k], cval[k]
        return s_low / n_low, (total_val - s_low) / (total - n_low)

    t = total_val / total  # mean intensity
    partition = int(np.floor(t))
    converged = False
    iterations = 0
    for _ in range(MAX_ITERATIONS):
        mu_low, mu_high = class_means(t)
        t_new = (mu_low + mu_high) / 2.0
        iterations += 1
        new_partition = int(np.floor(t_new))
        if new_partition == partition:
            # Same partition means t_new maps to itself: an exact fixed point.
            t = t_new
            converged = True
            break
        partition = new_partition
        t = t_new
    return ThresholdResult(float(t), iterations, converged)


def adjusted_cutoff(image, alpha: float) -> float:
    """Scale the intermeans threshold by a factor ``alpha`` in (0, 1].

    Lowering the cutoff admits dimmer objects; ``alpha = 1`` reproduces the
    plain intermeans threshold.
    """
    if not (0.0 < alpha <= 1.0):
        raise InvalidAlpha(f"alpha must lie in (0, 1], got {alpha}")
    return alpha * isodata_threshold(image).threshold
