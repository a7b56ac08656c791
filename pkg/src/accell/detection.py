"""Cell detection inside a segmented chamber.

Candidates come from thresholding at a scaled-down automatic cutoff:
lowering the cutoff admits dim cells the plain threshold misses, at the
cost of extra false positives, which a learned crop classifier then
filters out. The scale factor is chosen by grid search against
validation F1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import classifier as clf
from .errors import AlphaSearchFailed, EmptyDataset
from .imaging import binarize, connected_components, filter_by_area
from .metrics import box_contains, box_scores, match_boxes
from .thresholding import isodata_threshold
from .validation import check_binary_mask, check_gray_image, round_half_up

REAL_CELL = "real_cell"
NOT_CELL = "not_cell"
UNLABELED = "unlabeled"


@dataclass(frozen=True)
class CdmConfig:
    """Candidate generation and search configuration.

    Areas are inclusive pixel-count bounds; boxes are fixed size, centered
    on component centroids.
    """

    min_area: int = 1
    max_area: int = 25
    alpha_min: float = 0.70
    alpha_max: float = 0.99
    alpha_step: float = 0.01
    box_height: int = 20
    box_width: int = 20
    connectivity: int = 8

    def __post_init__(self):
        if not (1 <= self.min_area <= self.max_area):
            raise ValueError("need 1 <= min_area <= max_area")
        if not (0.0 < self.alpha_min <= self.alpha_max <= 1.0):
            raise ValueError("need 0 < alpha_min <= alpha_max <= 1")
        if self.alpha_step <= 0:
            raise ValueError("alpha_step must be positive")
        if self.box_height < 1 or self.box_width < 1:
            raise ValueError("box dims must be >= 1")


@dataclass(frozen=True)
class CandidateBox:
    center: tuple[int, int]
    height: int
    width: int
    component_area: int


@dataclass(frozen=True)
class Crop:
    """Fixed-size patch around a candidate, normalized to [0, 1]."""

    patch: np.ndarray
    label: str = UNLABELED

    def features(self) -> np.ndarray:
        return self.patch.ravel()


@dataclass(frozen=True)
class Detection:
    box: CandidateBox
    score: float


@dataclass(frozen=True)
class DetectionSample:
    """One image with its chamber mask and ground-truth cell points."""

    image_id: str
    image: np.ndarray
    chamber: np.ndarray
    cells: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AlphaScore:
    alpha: float
    precision: float
    recall: float
    f1: float
    unfiltered_precision: float
    unfiltered_recall: float
    unfiltered_f1: float


@dataclass(frozen=True)
class AlphaSearchReport:
    per_alpha: tuple[AlphaScore, ...]
    best_alpha: float


def alpha_grid(config: CdmConfig) -> list[float]:
    n = int(np.floor((config.alpha_max - config.alpha_min) / config.alpha_step + 1e-9))
    return [round(config.alpha_min + k * config.alpha_step, 10) for k in range(n + 1)]


def best_alpha_score(scores) -> AlphaScore:
    """Highest filtered F1 wins; ties go to the larger alpha (closest to
    the unscaled threshold)."""
    return max(scores, key=lambda s: (s.f1, s.alpha))


def candidates_from_threshold(image, chamber, threshold: float,
                              config: CdmConfig = CdmConfig()) -> list[CandidateBox]:
    """Candidate boxes from an explicit intensity threshold.

    Pixels above the threshold are grouped into connected components;
    components are kept when their area lies within the configured range
    and their rounded centroid falls inside the chamber mask.
    """
    arr = check_gray_image(image)
    chamber = check_binary_mask(chamber, arr.shape)
    comps = connected_components(binarize(arr, threshold), config.connectivity)
    comps = filter_by_area(comps, config.min_area, config.max_area)
    boxes = []
    for comp in comps:
        r = int(round_half_up(comp.centroid[0]))
        c = int(round_half_up(comp.centroid[1]))
        if chamber[r, c]:
            boxes.append(CandidateBox((r, c), config.box_height, config.box_width,
                                      comp.pixel_count))
    return boxes


def detect_candidates(image, chamber, alpha: float,
                      config: CdmConfig = CdmConfig()) -> list[CandidateBox]:
    """Candidate boxes at the scaled automatic cutoff ``alpha * T``."""
    base = isodata_threshold(image).threshold
    return candidates_from_threshold(image, chamber, alpha * base, config)


def extract_crop(image, box: CandidateBox) -> Crop:
    """Cut the box's patch from the image, zero-padded at the borders."""
    arr = check_gray_image(image)
    h, w = box.height, box.width
    top = box.center[0] - h // 2
    left = box.center[1] - w // 2
    patch = np.zeros((h, w), dtype=np.float64)
    r0, r1 = max(top, 0), min(top + h, arr.shape[0])
    c0, c1 = max(left, 0), min(left + w, arr.shape[1])
    if r0 < r1 and c0 < c1:
        patch[r0 - top:r1 - top, c0 - left:c1 - left] = arr[r0:r1, c0:c1] / 255.0
    return Crop(patch)


def label_crop(box: CandidateBox, gt_points) -> str:
    """"real_cell" when the box contains a ground-truth point (inclusive
    half-width rule, matching evaluation containment)."""
    for point in gt_points:
        if box_contains(box.center, box.height, box.width, point):
            return REAL_CELL
    return NOT_CELL


def _labeled_features(sample: DetectionSample, boxes):
    feats, labels = [], []
    for box in boxes:
        feats.append(extract_crop(sample.image, box).features())
        labels.append(1.0 if label_crop(box, sample.cells) == REAL_CELL else 0.0)
    return feats, labels


def _filter_boxes(image, boxes, params, threshold: float = 0.5):
    if not boxes:
        return []
    feats = np.stack([extract_crop(image, b).features() for b in boxes])
    probs = clf.forward(params, feats)
    return [Detection(b, float(p)) for b, p in zip(boxes, probs) if p >= threshold]


def search_alpha(train, val, config: CdmConfig = CdmConfig(),
                 train_config: clf.TrainConfig = clf.TrainConfig()):
    """Grid-search the cutoff scale and train the companion classifier.

    For every alpha on the grid, candidates are generated on the train and
    validation images, a classifier is trained on the labeled train crops
    (validation crops drive early stopping), and the box-level F1 of the
    filtered validation detections is recorded together with the
    unfiltered candidate scores. The alpha with the best filtered F1 wins;
    ties go to the larger alpha. Returns the report and the classifier
    trained at the winning alpha.

    Raises :class:`AlphaSearchFailed` when every alpha scores zero.
    """
    train = list(train)
    val = list(val)
    if not train or not val:
        raise EmptyDataset("alpha search requires nonempty train and validation splits")

    base_t = {s.image_id: isodata_threshold(s.image).threshold for s in train + val}
    scores = []
    trained: dict[float, clf.MlpParams] = {}
    for alpha in alpha_grid(config):
        train_feats, train_labels = [], []
        val_boxes = {}
        for sample in train:
            boxes = candidates_from_threshold(
                sample.image, sample.chamber, alpha * base_t[sample.image_id], config)
            f, l = _labeled_features(sample, boxes)
            train_feats.extend(f)
            train_labels.extend(l)
        val_feats, val_labels = [], []
        for sample in val:
            boxes = candidates_from_threshold(
                sample.image, sample.chamber, alpha * base_t[sample.image_id], config)
            val_boxes[sample.image_id] = boxes
            f, l = _labeled_features(sample, boxes)
            val_feats.extend(f)
            val_labels.extend(l)

        unfiltered = box_scores([
            match_boxes(val_boxes[s.image_id], s.cells) for s in val])

        if not train_feats or not val_feats:
            scores.append(AlphaScore(alpha, 0.0, 0.0, 0.0, unfiltered.precision,
                                     unfiltered.recall, unfiltered.f1))
            continue

        params, _ = clf.train(np.stack(train_feats), train_labels,
                              np.stack(val_feats), val_labels, train_config)
        trained[alpha] = params
        confusions = []
        for sample in val:
            kept = _filter_boxes(sample.image, val_boxes[sample.image_id], params)
            confusions.append(match_boxes([d.box for d in kept], sample.cells))
        filtered = box_scores(confusions)
        scores.append(AlphaScore(alpha, filtered.precision, filtered.recall,
                                 filtered.f1, unfiltered.precision,
                                 unfiltered.recall, unfiltered.f1))

    best = best_alpha_score(scores)
    if best.f1 == 0.0:
        raise AlphaSearchFailed("no alpha produced any correct validation detection")
    return AlphaSearchReport(tuple(scores), best.alpha), trained[best.alpha]


def detect_cells(image, chamber, alpha: float, params: clf.MlpParams,
                 config: CdmConfig = CdmConfig(),
                 decision_threshold: float = 0.5) -> list[Detection]:
    """Final detection: candidates at the scaled cutoff, then classifier
    filtering at the decision threshold (inclusive)."""
    boxes = detect_candidates(image, chamber, alpha, config)
    return _filter_boxes(image, boxes, params, decision_threshold)


class CellDetector(BaseEstimator):
    """Cutoff-scale search plus crop classifier as one estimator.

    ``fit`` consumes train/validation :class:`DetectionSample` sequences
    and exposes ``best_alpha_``, ``classifier_params_`` and
    ``search_report_``; ``detect`` then yields filtered detections for a
    new image and chamber mask.
    """

    def __init__(self, min_area: int = 1, max_area: int = 25,
                 alpha_min: float = 0.70, alpha_max: float = 0.99,
                 alpha_step: float = 0.01, box_height: int = 20,
                 box_width: int = 20, connectivity: int = 8,
                 learning_rate: float = 1e-3, batch_size: int = 64,
                 max_epochs: int = 500, patience: int = 30, seed: int = 0):
        self.min_area = min_area
        self.max_area = max_area
        self.alpha_min = alpha_min
        self.alpha_max = alpha_max
        self.alpha_step = alpha_step
        self.box_height = box_height
        self.box_width = box_width
        self.connectivity = connectivity
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _cdm_config(self) -> CdmConfig:
        return CdmConfig(self.min_area, self.max_area, self.alpha_min,
                         self.alpha_max, self.alpha_step, self.box_height,
                         self.box_width, self.connectivity)

    def _train_config(self) -> clf.TrainConfig:
        return clf.TrainConfig(self.learning_rate, self.batch_size,
                               self.max_epochs, self.patience, self.seed)

    def fit(self, train_samples, val_samples):
        self.search_report_, self.classifier_params_ = search_alpha(
            train_samples, val_samples, self._cdm_config(), self._train_config())
        self.best_alpha_ = self.search_report_.best_alpha
        return self

    def detect(self, image, chamber) -> list[Detection]:
        self._check_fitted()
        return detect_cells(image, chamber, self.best_alpha_,
                            self.classifier_params_, self._cdm_config())

    def predict(self, samples) -> list[list[Detection]]:
        return [self.detect(s.image, s.chamber) for s in samples]

    def _check_fitted(self):
        if not hasattr(self, "best_alpha_"):
            raise NotFittedError("detector is not fitted; call fit first")
