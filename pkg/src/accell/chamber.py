"""Zero-shot anterior chamber segmentation.

The chamber is never segmented directly. Instead, point prompts are
derived from the bright anterior segment that surrounds it: binarize at
the mean intensity, keep the largest object (merging a comparably sized
second object, which appears when the anterior segment is imaged as two
pieces), take its centroid, and offset prompts slightly left and right of
it. The prompts are handed to a promptable segmenter and the candidate
containing them becomes the chamber mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .backends import SegmenterOutput, validate_candidates
from .errors import BackendError, NoAnteriorSegment, PromptOutsideAllMasks
from .imaging import binarize, connected_components, mask_from_components
from .thresholding import mean_intensity
from .validation import check_gray_image, round_half_up

#: Offsets that worked well for anterior segment geometry: one prompt
#: slightly left and one slightly right of the centroid, at 5% of the
#: image width. Offset components with magnitude < 1 are fractions of the
#: image width; larger magnitudes are absolute pixels.
DEFAULT_OFFSETS = ((0.0, 0.05), (0.0, -0.05))
DEFAULT_MERGE_RATIO = 0.7


@dataclass(frozen=True)
class PromptSet:
    points: tuple[tuple[int, int], ...]
    source_centroid: tuple[float, float]


@dataclass(frozen=True)
class ChamberMask:
    """Final chamber mask; every connected component contains a prompt."""

    mask: np.ndarray
    prompts_used: PromptSet


def _resolve_offset(value: float, width: int) -> float:
    return value * width if abs(value) < 1.0 else float(value)


def anterior_segment_mask(image, merge_ratio: float = DEFAULT_MERGE_RATIO,
                          connectivity: int = 8) -> np.ndarray:
    """Mask of the bright anterior segment.

    Binarizes at the mean intensity and keeps the largest connected
    object. If the second-largest object's area exceeds ``merge_ratio``
    times the largest one's, the two are merged: that situation arises
    when the anterior segment is imaged as two separate pieces and using
    only one would skew the centroid.
    """
    arr = check_gray_image(image)
    mask = binarize(arr, mean_intensity(arr))
    comps = connected_components(mask, connectivity)
    if len(comps) == 0:
        raise NoAnteriorSegment("no object pixels above the mean intensity")
    keep = [comps[0]]
    if len(comps) > 1 and comps[1].pixel_count / comps[0].pixel_count > merge_ratio:
        keep.append(comps[1])
    return mask_from_components(keep, arr.shape)


def mask_centroid(mask) -> tuple[float, float]:
    """Arithmetic mean of the mask's member coordinates as (row, col)."""
    rows, cols = np.nonzero(np.asarray(mask, dtype=bool))
    if rows.size == 0:
        raise NoAnteriorSegment("cannot take the centroid of an empty mask")
    return float(rows.mean()), float(cols.mean())


def generate_prompts(image, offsets=DEFAULT_OFFSETS,
                     merge_ratio: float = DEFAULT_MERGE_RATIO,
                     connectivity: int = 8) -> PromptSet:
    """Derive point prompts from the anterior segment centroid.

    Each offset is added to the centroid; fractional components (magnitude
    below 1) scale with the image width. Prompt coordinates are rounded to
    the nearest pixel and clamped to the image bounds.
    """
    arr = check_gray_image(image)
    h, w = arr.shape
    centroid = mask_centroid(anterior_segment_mask(arr, merge_ratio, connectivity))
    points = []
    for d_row, d_col in offsets:
        row = round_half_up(centroid[0] + _resolve_offset(d_row, w))
        col = round_half_up(centroid[1] + _resolve_offset(d_col, w))
        points.append((int(np.clip(row, 0, h - 1)), int(np.clip(col, 0, w - 1))))
    return PromptSet(tuple(points), centroid)


def select_chamber_mask(output: SegmenterOutput, prompts: PromptSet,
                        connectivity: int = 8) -> ChamberMask:
    """Pick the candidate containing the most prompts and trim it.

    Ties between candidates are broken by higher score. Within the chosen
    candidate, only connected components containing at least one prompt
    are retained, discarding any extra regions the segmenter produced.
    """
    if len(output) == 0:
        raise PromptOutsideAllMasks("segmenter returned no candidates")
    best = None
    for idx, cand in enumerate(output):
        contained = sum(1 for (r, c) in prompts.points if cand.mask[r, c])
        key = (contained, cand.score, -idx)
        if best is None or key > best[0]:
            best = (key, cand)
    (contained, _, _), cand = best
    if contained == 0:
        raise PromptOutsideAllMasks("no candidate mask contains any prompt point")

    comps = connected_components(cand.mask, connectivity)
    labels = np.zeros(cand.mask.shape, dtype=np.int64)
    for comp in comps:
        labels[comp.pixels[:, 0], comp.pixels[:, 1]] = comp.label
    hit = {labels[r, c] for (r, c) in prompts.points if labels[r, c] > 0}
    keep = [comp for comp in comps if comp.label in hit]
    return ChamberMask(mask_from_components(keep, cand.mask.shape), prompts)


def segment_chamber(image, segmenter, offsets=DEFAULT_OFFSETS,
                    merge_ratio: float = DEFAULT_MERGE_RATIO,
                    connectivity: int = 8) -> ChamberMask:
    """Full chamber segmentation: prompts, backend call, mask selection."""
    arr = check_gray_image(image)
    prompts = generate_prompts(arr, offsets, merge_ratio, connectivity)
    try:
        output = segmenter.segment(arr, prompts.points)
    except BackendError:
        raise
    except Exception as exc:  # transport/backends must not crash the pipeline
        raise BackendError(f"segmenter backend failed: {exc}") from exc
    validate_candidates(output, arr.shape)
    return select_chamber_mask(output, prompts, connectivity)


class ChamberSegmenter(BaseEstimator):
    """Zero-shot chamber segmentation as a scikit-learn style transformer.

    There is nothing to fit: ``fit`` exists so the estimator composes with
    pipelines and parameter search utilities.

    Parameters
    ----------
    segmenter : PromptableSegmenter
        Backend used to turn prompts into candidate masks.
    merge_ratio : float
        Second-to-largest object area ratio above which the two largest
        objects both count as anterior segment.
    offsets : sequence of (row, col)
        Prompt offsets from the anterior segment centroid; components with
        magnitude below 1 are fractions of the image width.
    connectivity : {4, 8}
        Adjacency used for all component analysis.
    """

    def __init__(self, segmenter=None, merge_ratio: float = DEFAULT_MERGE_RATIO,
                 offsets=DEFAULT_OFFSETS, connectivity: int = 8):
        self.segmenter = segmenter
        self.merge_ratio = merge_ratio
        self.offsets = offsets
        self.connectivity = connectivity

    def fit(self, X=None, y=None):
        if self.segmenter is None:
            raise ValueError("a segmenter backend is required")
        self.fitted_ = True
        return self

    def segment(self, image) -> ChamberMask:
        if self.segmenter is None:
            raise NotFittedError("no segmenter backend configured")
        return segment_chamber(image, self.segmenter, self.offsets,
                               self.merge_ratio, self.connectivity)

    def transform(self, images) -> list[ChamberMask]:
        """Segment a sequence of images, one chamber mask each."""
        return [self.segment(img) for img in images]
