"""Detection metrics against an independent brute-force counting oracle."""

from __future__ import annotations

import numpy as np
import pytest

from claimguard.errors import ValidationError
from claimguard.evaluation.detection import (
    Detection,
    iou,
    match_detections,
    pr_curve,
    precision_recall_at,
)
from claimguard.model import DamageClass, DamageRegion, NormalizedBBox, RegionSource


def nbox(left: float, top: float, right: float, bottom: float) -> NormalizedBBox:
    return NormalizedBBox.from_corners(left, top, right, bottom)


def det(image_id: str, box: NormalizedBBox, conf: float) -> Detection:
    return Detection(
        image_id=image_id, bbox=box, damage_class=DamageClass.SCRATCH, confidence=conf
    )


def gt(box: NormalizedBBox) -> DamageRegion:
    return DamageRegion(bbox=box, damage_class=DamageClass.SCRATCH)


# ---------------------------------------------------------------- oracle


def oracle_match(preds, gts, iou_threshold):
    """Naive restatement of the greedy rule, written independently:
    walk predictions by descending confidence (stable), give each the
    unmatched ground truth with the largest overlap if it clears the
    threshold."""
    remaining = list(range(len(gts)))
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    tp = 0
    for pi in order:
        best = None
        best_iou = -1.0
        for gi in remaining:
            o = iou(preds[pi].bbox, gts[gi].bbox)
            if o > best_iou:
                best_iou = o
                best = gi
        if best is not None and best_iou >= iou_threshold:
            remaining.remove(best)
            tp += 1
    return tp, len(preds) - tp, len(gts) - tp


def oracle_pr(preds_by_image, gts_by_image, conf_t, iou_t):
    tp = fp = fn = 0
    for image_id in set(preds_by_image) | set(gts_by_image):
        preds = [p for p in preds_by_image.get(image_id, []) if p.confidence >= conf_t]
        gts = gts_by_image.get(image_id, [])
        t, f, n = oracle_match(preds, gts, iou_t)
        tp, fp, fn = tp + t, fp + f, fn + n
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 0.0 if tp + fn == 0 else tp / (tp + fn)
    return tp, fp, fn, precision, recall


def random_scene(rng: np.random.Generator):
    """A few images with random boxes; boxes deliberately overlap often."""
    preds_by_image: dict[str, list[Detection]] = {}
    gts_by_image: dict[str, list[DamageRegion]] = {}
    for img_idx in range(int(rng.integers(1, 5))):
        image_id = f"img-{img_idx}"
        gts_by_image[image_id] = []
        preds_by_image[image_id] = []
        for _ in range(int(rng.integers(0, 5))):
            cx, cy = rng.uniform(0.2, 0.8, size=2)
            w, h = rng.uniform(0.1, 0.4, size=2)
            gts_by_image[image_id].append(gt(NormalizedBBox(cx, cy, min(w, 1), min(h, 1))))
        for _ in range(int(rng.integers(0, 6))):
            if gts_by_image[image_id] and rng.uniform() < 0.6:
                base = gts_by_image[image_id][
                    int(rng.integers(0, len(gts_by_image[image_id])))
                ].bbox
                cx = float(np.clip(base.cx + rng.normal(0, 0.05), 0, 1))
                cy = float(np.clip(base.cy + rng.normal(0, 0.05), 0, 1))
                w = float(np.clip(base.w * rng.uniform(0.7, 1.3), 0.01, 1))
                h = float(np.clip(base.h * rng.uniform(0.7, 1.3), 0.01, 1))
            else:
                cx, cy = (float(v) for v in rng.uniform(0.2, 0.8, size=2))
                w, h = (float(np.clip(v, 0.01, 1)) for v in rng.uniform(0.05, 0.4, size=2))
            preds_by_image[image_id].append(
                det(image_id, NormalizedBBox(cx, cy, w, h), float(rng.uniform(0, 1)))
            )
    return preds_by_image, gts_by_image


# ----------------------------------------------------------------- tests


class TestIoU:
    def test_identical_boxes(self):
        box = NormalizedBBox(0.5, 0.5, 0.4, 0.3)
        assert iou(box, box) == 1.0

    def test_disjoint_boxes(self):
        assert iou(NormalizedBBox(0.2, 0.2, 0.1, 0.1), NormalizedBBox(0.8, 0.8, 0.1, 0.1)) == 0.0

    def test_hand_computed_sevenths(self):
        # Corner boxes (0,0)-(2,2) and (1,1)-(3,3) on a 4-unit frame:
        # intersection 1, union 7.
        a = nbox(0.0, 0.0, 0.5, 0.5)
        b = nbox(0.25, 0.25, 0.75, 0.75)
        assert abs(iou(a, b) - 1.0 / 7.0) <= 1e-12

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = NormalizedBBox(*rng.uniform(0.2, 0.8, 2), *rng.uniform(0.05, 0.5, 2))
            b = NormalizedBBox(*rng.uniform(0.2, 0.8, 2), *rng.uniform(0.05, 0.5, 2))
            ab = iou(a, b)
            assert ab == iou(b, a)
            assert 0.0 <= ab <= 1.0


class TestMatchDetections:
    def test_perfect_single_match(self):
        box = NormalizedBBox(0.5, 0.5, 0.2, 0.2)
        counts = match_detections([det("i", box, 0.9)], [gt(box)], 0.5)
        assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)
        assert counts.assignment == ((0, 0),)

    def test_higher_confidence_wins_shared_gt(self):
        box = NormalizedBBox(0.5, 0.5, 0.2, 0.2)
        near = NormalizedBBox(0.52, 0.5, 0.2, 0.2)
        counts = match_detections(
            [det("i", near, 0.8), det("i", box, 0.9)], [gt(box)], 0.5
        )
        assert (counts.tp, counts.fp, counts.fn) == (1, 1, 0)
        # the 0.9-confidence pred (index 1) takes the ground truth
        assert counts.assignment == ((1, 0),)

    def test_low_iou_is_fp_and_fn(self):
        counts = match_detections(
            [det("i", NormalizedBBox(0.3, 0.3, 0.2, 0.2), 0.9)],
            [gt(NormalizedBBox(0.6, 0.6, 0.2, 0.2))],
            0.5,
        )
        assert (counts.tp, counts.fp, counts.fn) == (0, 1, 1)

    def test_mixed_image_ids_rejected(self):
        box = NormalizedBBox(0.5, 0.5, 0.2, 0.2)
        with pytest.raises(ValidationError):
            match_detections([det("a", box, 0.9), det("b", box, 0.8)], [gt(box)], 0.5)

    def test_matches_oracle_on_random_scenes(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            preds_by_image, gts_by_image = random_scene(rng)
            for image_id, preds in preds_by_image.items():
                gts = gts_by_image.get(image_id, [])
                counts = match_detections(preds, gts, 0.5)
                assert (counts.tp, counts.fp, counts.fn) == oracle_match(preds, gts, 0.5)


class TestPrecisionRecall:
    def perfect_fixture(self):
        boxes = [NormalizedBBox(0.3, 0.3, 0.2, 0.2), NormalizedBBox(0.7, 0.7, 0.2, 0.2)]
        gts = {"i0": [gt(boxes[0])], "i1": [gt(boxes[1])]}
        preds = {"i0": [det("i0", boxes[0], 0.8)], "i1": [det("i1", boxes[1], 0.7)]}
        return preds, gts

    def test_perfect_detector(self):
        preds, gts = self.perfect_fixture()
        point = precision_recall_at(preds, gts, confidence_threshold=0.5)
        assert point.precision == 1.0 and point.recall == 1.0
        assert (point.tp, point.fp, point.fn) == (2, 0, 0)

    def test_threshold_above_all_confidences(self):
        preds, gts = self.perfect_fixture()
        point = precision_recall_at(preds, gts, confidence_threshold=0.95)
        assert point.precision == 1.0  # empty-prediction convention
        assert point.recall == 0.0

    def test_matches_oracle_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            preds, gts = random_scene(rng)
            for conf_t in (0.1, 0.5, 0.9):
                point = precision_recall_at(preds, gts, conf_t, 0.5)
                otp, ofp, ofn, op, orr = oracle_pr(preds, gts, conf_t, 0.5)
                assert (point.tp, point.fp, point.fn) == (otp, ofp, ofn)
                assert point.precision == op
                assert point.recall == orr


class TestPrCurve:
    def test_all_precision_one_on_perfect_fixture(self):
        preds, gts = TestPrecisionRecall().perfect_fixture()
        curve = pr_curve(preds, gts, thresholds=[0.1, 0.3, 0.5, 0.7, 0.9])
        assert all(p.precision == 1.0 for p in curve.points)

    def test_recall_nonincreasing_in_threshold(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            preds, gts = random_scene(rng)
            curve = pr_curve(preds, gts, thresholds=[0.1, 0.3, 0.5, 0.7, 0.9])
            recalls = [p.recall for p in curve.points]
            assert all(a >= b for a, b in zip(recalls, recalls[1:]))

    def test_unsorted_thresholds_rejected(self):
        with pytest.raises(ValidationError):
            pr_curve({}, {}, thresholds=[0.5, 0.1])
