"""Segmentation overlap metrics and detection precision/recall/F1.

Detection is scored by matching predicted boxes to ground-truth cell
points: a box is correct if it contains an unclaimed point, and each
point can be claimed by at most one box. Scores are reported at two
levels: per-image averages and global (box-level) sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset
from .validation import check_binary_mask, check_same_shape


@dataclass(frozen=True)
class BoxConfusion:
    """Per-image detection confusion counts.

    Conservation laws: tp + fn equals the number of ground-truth points,
    and tp + fp equals the number of predicted boxes.
    """

    tp: int
    fp: int
    fn: int

    @property
    def n_gt(self) -> int:
        return self.tp + self.fn

    @property
    def n_pred(self) -> int:
        return self.tp + self.fp


@dataclass(frozen=True)
class DetectionScores:
    precision: float
    recall: float
    f1: float
    level: str  # "image" or "box"


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def iou(pred, gt) -> float:
    """Intersection over union of two masks; 1.0 when both are empty."""
    pred = check_binary_mask(pred)
    gt = check_binary_mask(gt)
    check_same_shape(pred, gt)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    denom = tp + fp + fn
    return tp / denom if denom > 0 else 1.0


def dice(pred, gt) -> float:
    """Dice coefficient of two masks; 1.0 when both are empty."""
    pred = check_binary_mask(pred)
    gt = check_binary_mask(gt)
    check_same_shape(pred, gt)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 1.0


def box_contains(center: tuple[int, int], height: int, width: int,
                 point: tuple[int, int]) -> bool:
    """Inclusive containment test shared by crop labeling and evaluation."""
    return (abs(point[0] - center[0]) <= height // 2
            and abs(point[1] - center[1]) <= width // 2)


def match_boxes(pred_boxes, gt_points) -> BoxConfusion:
    """Greedily match predicted boxes to ground-truth points for one image.

    Predictions are visited sorted by (center row, center col). Each one
    claims the nearest (Euclidean; ties by row then col) unclaimed point it
    contains; a claimed point is removed from consideration for later
    boxes. Unmatched boxes count as false positives, unmatched points as
    false negatives.
    """
    boxes = sorted(pred_boxes, key=lambda b: b.center)
    points = list(gt_points)
    claimed = [False] * len(points)
    tp = 0
    for box in boxes:
        best = None
        for i, (pr, pc) in enumerate(points):
            if claimed[i] or not box_contains(box.center, box.height, box.width, (pr, pc)):
                continue
            d2 = (pr - box.center[0]) ** 2 + (pc - box.center[1]) ** 2
            key = (d2, pr, pc)
            if best is None or key < best[0]:
                best = (key, i)
        if best is not None:
            claimed[best[1]] = True
            tp += 1
    return BoxConfusion(tp=tp, fp=len(boxes) - tp, fn=len(points) - tp)


def image_scores(confusions) -> DetectionScores:
    """Average per-image precision and recall, then F1 of the averages.

    Per-image edge rules: an image with ground truth but no predictions,
    or predictions but no ground truth, contributes (0, 0); an image with
    neither contributes (1, 1).
    """
    confusions = list(confusions)
    if not confusions:
        raise EmptyDataset("image_scores requires at least one image")
    ps, rs = [], []
    for c in confusions:
        if c.n_gt == 0 and c.n_pred == 0:
            p = r = 1.0
        elif c.n_gt == 0 or c.n_pred == 0:
            p = r = 0.0
        else:
            p = c.tp / c.n_pred
            r = c.tp / c.n_gt
        ps.append(p)
        rs.append(r)
    precision = math.fsum(ps) / len(ps)
    recall = math.fsum(rs) / len(rs)
    return DetectionScores(precision, recall, _f1(precision, recall), "image")


def box_scores(confusions) -> DetectionScores:
    """Global precision/recall/F1 from summed confusions; 0 on empty sums."""
    confusions = list(confusions)
    if not confusions:
        raise EmptyDataset("box_scores requires at least one image")
    tp = sum(c.tp for c in confusions)
    fp = sum(c.fp for c in confusions)
    fn = sum(c.fn for c in confusions)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return DetectionScores(precision, recall, _f1(precision, recall), "box")
