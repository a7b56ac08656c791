import numpy as np
import pytest

from accell.detection import CandidateBox
from accell.errors import EmptyDataset, ShapeError
from accell.metrics import (BoxConfusion, box_scores, dice, image_scores, iou,
                            match_boxes)


def box(r, c, h=20, w=20):
    return CandidateBox((r, c), h, w, 1)


def greedy_match_reference(boxes, points):
    """Independent quadratic reimplementation of the matching rule."""
    remaining = {i: p for i, p in enumerate(points)}
    tp = 0
    for b in sorted(boxes, key=lambda b: (b.center[0], b.center[1])):
        contained = []
        for i, (pr, pc) in remaining.items():
            if abs(pr - b.center[0]) <= b.height // 2 and abs(pc - b.center[1]) <= b.width // 2:
                d2 = (pr - b.center[0]) ** 2 + (pc - b.center[1]) ** 2
                contained.append((d2, pr, pc, i))
        if contained:
            contained.sort()
            del remaining[contained[0][3]]
            tp += 1
    return BoxConfusion(tp, len(boxes) - tp, len(points) - tp)


def max_containment_matching(boxes, points):
    """Exhaustive maximum bipartite matching size (augmenting paths)."""
    adj = [
        [j for j, (pr, pc) in enumerate(points)
         if abs(pr - b.center[0]) <= b.height // 2 and abs(pc - b.center[1]) <= b.width // 2]
        for b in boxes
    ]
    match_of_point = [-1] * len(points)

    def try_assign(i, visited):
        for j in adj[i]:
            if j in visited:
                continue
            visited.add(j)
            if match_of_point[j] < 0 or try_assign(match_of_point[j], visited):
                match_of_point[j] = i
                return True
        return False

    return sum(try_assign(i, set()) for i in range(len(boxes)))


class TestOverlapMetrics:
    def test_identical_masks(self):
        m = np.zeros((4, 4), dtype=bool)
        m[1:3, 1:3] = True
        assert iou(m, m) == 1.0
        assert dice(m, m) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[0, 0] = b[3, 3] = True
        assert iou(a, b) == 0.0
        assert dice(a, b) == 0.0

    def test_shifted_blocks(self):
        # 2x2 blocks shifted one column: TP=2, FP=2, FN=2.
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[1:3, 0:2] = True
        b[1:3, 1:3] = True
        assert iou(a, b) == pytest.approx(1 / 3)
        assert dice(a, b) == pytest.approx(0.5)

    def test_both_empty(self):
        e = np.zeros((3, 3), dtype=bool)
        assert iou(e, e) == 1.0
        assert dice(e, e) == 1.0

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            iou(np.zeros((2, 2), dtype=bool), np.zeros((3, 3), dtype=bool))
        with pytest.raises(ShapeError):
            dice(np.zeros((2, 2), dtype=bool), np.zeros((2, 3), dtype=bool))

    def test_dice_iou_identity_random(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            a = rng.random((8, 8)) < 0.5
            b = rng.random((8, 8)) < 0.5
            i = iou(a, b)
            assert dice(a, b) == pytest.approx(2 * i / (1 + i), abs=1e-12)
            assert i <= dice(a, b) + 1e-15
            assert iou(a, b) == iou(b, a)
            assert dice(a, b) == dice(b, a)


class TestMatchBoxes:
    def test_containment_hit(self):
        conf = match_boxes([box(10, 10)], [(12, 14)])
        assert (conf.tp, conf.fp, conf.fn) == (1, 0, 0)

    def test_boundary_containment_inclusive(self):
        assert match_boxes([box(10, 10)], [(10, 20)]).tp == 1
        assert match_boxes([box(10, 10)], [(10, 21)]).tp == 0

    def test_one_claim_per_box(self):
        conf = match_boxes([box(10, 10)], [(9, 9), (11, 11)])
        assert (conf.tp, conf.fp, conf.fn) == (1, 0, 1)

    def test_claimed_point_removed(self):
        conf = match_boxes([box(10, 10), box(12, 12)], [(11, 11)])
        assert (conf.tp, conf.fp, conf.fn) == (1, 1, 0)

    def test_conservation_laws_random(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            boxes = [box(int(r), int(c)) for r, c in rng.integers(0, 60, size=(rng.integers(0, 9), 2))]
            points = [tuple(map(int, p)) for p in rng.integers(0, 60, size=(rng.integers(0, 9), 2))]
            conf = match_boxes(boxes, points)
            assert conf.tp + conf.fp == len(boxes)
            assert conf.tp + conf.fn == len(points)

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            n_boxes = int(rng.integers(0, 10))
            n_points = int(rng.integers(0, 10))
            boxes = [box(int(r), int(c), 2 * int(rng.integers(1, 12)), 2 * int(rng.integers(1, 12)))
                     for r, c in rng.integers(0, 40, size=(n_boxes, 2))]
            points = [tuple(map(int, p)) for p in rng.integers(0, 40, size=(n_points, 2))]
            assert match_boxes(boxes, points) == greedy_match_reference(boxes, points)

    def test_tp_bounded_by_max_matching(self):
        rng = np.random.default_rng(34)
        for _ in range(300):
            n_boxes = int(rng.integers(0, 9))
            n_points = int(rng.integers(0, 9))
            boxes = [box(int(r), int(c)) for r, c in rng.integers(0, 30, size=(n_boxes, 2))]
            points = [tuple(map(int, p)) for p in rng.integers(0, 30, size=(n_points, 2))]
            assert match_boxes(boxes, points).tp <= max_containment_matching(boxes, points)


class TestScores:
    def test_image_level_averaging(self):
        confs = [BoxConfusion(1, 0, 0), BoxConfusion(0, 1, 1)]
        scores = image_scores(confs)
        assert scores.precision == 0.5
        assert scores.recall == 0.5
        assert scores.f1 == 0.5

    def test_gt_present_no_predictions(self):
        scores = image_scores([BoxConfusion(0, 0, 3)])
        assert (scores.precision, scores.recall, scores.f1) == (0.0, 0.0, 0.0)

    def test_predictions_without_gt(self):
        scores = image_scores([BoxConfusion(0, 2, 0)])
        assert (scores.precision, scores.recall) == (0.0, 0.0)

    def test_empty_image_perfectly_detected(self):
        scores = image_scores([BoxConfusion(0, 0, 0)])
        assert (scores.precision, scores.recall, scores.f1) == (1.0, 1.0, 1.0)

    def test_single_perfect_image(self):
        scores = image_scores([BoxConfusion(5, 0, 0)])
        assert (scores.precision, scores.recall, scores.f1) == (1.0, 1.0, 1.0)

    def test_empty_list_raises(self):
        with pytest.raises(EmptyDataset):
            image_scores([])

    def test_box_level_sums(self):
        scores = box_scores([BoxConfusion(1, 0, 0), BoxConfusion(1, 1, 1)])
        assert scores.precision == pytest.approx(2 / 3)
        assert scores.recall == pytest.approx(2 / 3)
        assert scores.f1 == pytest.approx(2 / 3)

    def test_box_level_zero_denominators(self):
        scores = box_scores([BoxConfusion(0, 0, 0)])
        assert (scores.precision, scores.recall, scores.f1) == (0.0, 0.0, 0.0)

    def test_box_level_single_image(self):
        conf = BoxConfusion(3, 1, 2)
        scores = box_scores([conf])
        assert scores.precision == pytest.approx(3 / 4)
        assert scores.recall == pytest.approx(3 / 5)
