"""Detection metrics: IoU matching, precision/recall points, PR curves.

Matching is greedy: predictions sorted by confidence (ties keep input
order) each claim the unmatched ground-truth box of highest IoU at or above
the threshold. Counts pool over all damage classes; precision at zero
surviving predictions is 1.0 by convention so threshold sweeps stay total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..errors import ValidationError
from ..model import DamageClass, DamageRegion, NormalizedBBox


@dataclass(frozen=True)
class Detection:
    """One detector output box on one image."""

    image_id: str
    bbox: NormalizedBBox
    damage_class: DamageClass
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int
    assignment: tuple[tuple[int, int], ...]  # (prediction index, ground-truth index)


@dataclass(frozen=True)
class PrPoint:
    confidence_threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class PrCurve:
    iou_threshold: float
    points: tuple[PrPoint, ...]


def iou(a: NormalizedBBox, b: NormalizedBBox) -> float:
    """Intersection area / union area in normalized coordinates.

    Areas derive from the same corner arithmetic as the intersection so
    iou(x, x) is exactly 1.0.
    """
    a_left, a_top, a_right, a_bottom = a.corners()
    b_left, b_top, b_right, b_bottom = b.corners()
    inter_w = max(0.0, min(a_right, b_right) - max(a_left, b_left))
    inter_h = max(0.0, min(a_bottom, b_bottom) - max(a_top, b_top))
    inter = inter_w * inter_h
    area_a = (a_right - a_left) * (a_bottom - a_top)
    area_b = (b_right - b_left) * (b_bottom - b_top)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def match_detections(
    preds: Sequence[Detection],
    gts: Sequence[DamageRegion],
    iou_threshold: float = 0.5,
) -> MatchCounts:
    """Greedy one-image matching; unmatched preds are fp, unmatched gts fn."""
    image_ids = {p.image_id for p in preds}
    if len(image_ids) > 1:
        raise ValidationError(f"predictions span multiple images: {sorted(image_ids)}")

    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    taken = [False] * len(gts)
    assignment: list[tuple[int, int]] = []
    for pred_idx in order:
        best_iou = 0.0
        best_gt = -1
        for gt_idx, gt in enumerate(gts):
            if taken[gt_idx]:
                continue
            overlap = iou(preds[pred_idx].bbox, gt.bbox)
            if overlap > best_iou:
                best_iou = overlap
                best_gt = gt_idx
        if best_gt >= 0 and best_iou >= iou_threshold:
            taken[best_gt] = True
            assignment.append((pred_idx, best_gt))
    tp = len(assignment)
    return MatchCounts(
        tp=tp,
        fp=len(preds) - tp,
        fn=len(gts) - tp,
        assignment=tuple(sorted(assignment)),
    )


def _aggregate(
    preds_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[DamageRegion]],
    confidence_threshold: float,
    iou_threshold: float,
) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for image_id in sorted(set(preds_by_image) | set(gts_by_image)):
        surviving = [
            p for p in preds_by_image.get(image_id, ()) if p.confidence >= confidence_threshold
        ]
        counts = match_detections(surviving, gts_by_image.get(image_id, ()), iou_threshold)
        tp += counts.tp
        fp += counts.fp
        fn += counts.fn
    return tp, fp, fn


def precision_recall_at(
    preds_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[DamageRegion]],
    confidence_threshold: float,
    iou_threshold: float = 0.5,
) -> PrPoint:
    """Pooled counts over all images at one confidence threshold."""
    tp, fp, fn = _aggregate(preds_by_image, gts_by_image, confidence_threshold, iou_threshold)
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 0.0 if tp + fn == 0 else tp / (tp + fn)
    return PrPoint(
        confidence_threshold=confidence_threshold,
        precision=precision,
        recall=recall,
        tp=tp,
        fp=fp,
        fn=fn,
    )


def pr_curve(
    preds_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[DamageRegion]],
    iou_threshold: float = 0.5,
    thresholds: Iterable[float] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
) -> PrCurve:
    """One PrPoint per confidence threshold; thresholds must be ascending."""
    values = list(thresholds)
    if values != sorted(values):
        raise ValidationError("thresholds must be sorted ascending")
    points = tuple(
        precision_recall_at(preds_by_image, gts_by_image, t, iou_threshold) for t in values
    )
    return PrCurve(iou_threshold=iou_threshold, points=points)


def group_by_image(
    items: Iterable[Detection],
) -> dict[str, list[Detection]]:
    grouped: dict[str, list[Detection]] = {}
    for item in items:
        grouped.setdefault(item.image_id, []).append(item)
    return grouped
