"""Core domain types: claims, evidence, damage regions, enrolled features.

Timestamps are integer milliseconds UTC everywhere so records order totally
without timezone ambiguity. JSON field names below are the wire contract for
the service API and the store snapshot; `DamageRegion.damage_class`
serializes as "class".
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from .errors import ValidationError


class ClaimStatus(str, Enum):
    PENDING = "pending"
    SETTLED = "settled"
    FLAGGED = "flagged"
    FRAUD_CONFIRMED = "fraud_confirmed"
    CLEARED = "cleared"


# Allowed lifecycle edges. Terminal states have no outgoing edges.
STATUS_TRANSITIONS: dict[ClaimStatus, set[ClaimStatus]] = {
    ClaimStatus.PENDING: {ClaimStatus.SETTLED, ClaimStatus.FLAGGED},
    ClaimStatus.FLAGGED: {ClaimStatus.FRAUD_CONFIRMED, ClaimStatus.CLEARED},
    ClaimStatus.CLEARED: {ClaimStatus.SETTLED},
    ClaimStatus.SETTLED: set(),
    ClaimStatus.FRAUD_CONFIRMED: set(),
}


class EvidenceKind(str, Enum):
    FULL_BODY = "full_body"
    CLOSE_UP = "close_up"


class DamageClass(str, Enum):
    SCRATCH = "scratch"
    DENT = "dent"
    CRACK = "crack"


class RegionSource(str, Enum):
    ANNOTATION = "annotation"
    DETECTOR = "detector"


class ReviewDecision(str, Enum):
    FRAUD = "fraud"
    LEGITIMATE = "legitimate"


@dataclass(frozen=True)
class NormalizedBBox:
    """Box center and size normalized to image dimensions."""

    cx: float
    cy: float
    w: float
    h: float

    def validate(self) -> None:
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValidationError(
                f"bbox center ({self.cx}, {self.cy}) outside [0, 1]", field="bbox"
            )
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValidationError(
                f"bbox size ({self.w}, {self.h}) outside (0, 1]", field="bbox"
            )

    def corners(self) -> tuple[float, float, float, float]:
        """(left, top, right, bottom) in normalized coordinates, unclipped."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @staticmethod
    def from_corners(left: float, top: float, right: float, bottom: float) -> "NormalizedBBox":
        return NormalizedBBox(
            cx=(left + right) / 2.0,
            cy=(top + bottom) / 2.0,
            w=right - left,
            h=bottom - top,
        )

    def to_pixel_corners(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Half-open pixel box (x0, y0, x1, y1), clipped to the frame.

        Rule: round the normalized edges, clamp the origin into the frame,
        then force at least one pixel of extent. Raises nothing; callers that
        need the fully-outside check use `crop_roi`.
        """
        left, top, right, bottom = self.corners()
        x0 = min(max(round(left * width), 0), width - 1)
        y0 = min(max(round(top * height), 0), height - 1)
        x1 = min(max(round(right * width), x0 + 1), width)
        y1 = min(max(round(bottom * height), y0 + 1), height)
        return int(x0), int(y0), int(x1), int(y1)

    def to_json(self) -> dict[str, float]:
        return {"cx": self.cx, "cy": self.cy, "w": self.w, "h": self.h}

    @staticmethod
    def from_json(data: dict[str, Any]) -> "NormalizedBBox":
        return NormalizedBBox(
            cx=float(data["cx"]), cy=float(data["cy"]), w=float(data["w"]), h=float(data["h"])
        )


@dataclass(frozen=True)
class DamageRegion:
    """One damage box: annotation ground truth or detector output."""

    bbox: NormalizedBBox
    damage_class: DamageClass
    source: RegionSource = RegionSource.ANNOTATION
    confidence: float | None = None

    def validate(self) -> None:
        self.bbox.validate()
        has_conf = self.confidence is not None
        if (self.source is RegionSource.DETECTOR) != has_conf:
            raise ValidationError(
                "confidence must be present iff source=detector", field="confidence"
            )
        if has_conf and not (0.0 <= float(self.confidence) <= 1.0):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]", field="confidence")

    def to_json(self) -> dict[str, Any]:
        return {
            "bbox": self.bbox.to_json(),
            "class": self.damage_class.value,
            "confidence": self.confidence,
            "source": self.source.value,
        }

    @staticmethod
    def from_json(data: dict[str, Any]) -> "DamageRegion":
        conf = data.get("confidence")
        return DamageRegion(
            bbox=NormalizedBBox.from_json(data["bbox"]),
            damage_class=DamageClass(data["class"]),
            source=RegionSource(data.get("source", "annotation")),
            confidence=None if conf is None else float(conf),
        )


@dataclass(frozen=True)
class ImageEvidence:
    """One evidence photo: a whole-body shot or a damage close-up."""

    image_id: str
    kind: EvidenceKind
    content_ref: str
    regions: tuple[DamageRegion, ...] = ()

    def validate(self, require_close_up_regions: bool = True) -> None:
        if not self.image_id:
            raise ValidationError("image_id must be non-empty", field="image_id")
        if require_close_up_regions and self.kind is EvidenceKind.CLOSE_UP and not self.regions:
            raise ValidationError(
                f"close_up image {self.image_id} carries no damage region", field="regions"
            )
        for region in self.regions:
            region.validate()

    def to_json(self) -> dict[str, Any]:
        return {
            "image_id": self.image_id,
            "kind": self.kind.value,
            "content_ref": self.content_ref,
            "regions": [r.to_json() for r in self.regions],
        }

    @staticmethod
    def from_json(data: dict[str, Any]) -> "ImageEvidence":
        return ImageEvidence(
            image_id=str(data["image_id"]),
            kind=EvidenceKind(data["kind"]),
            content_ref=str(data.get("content_ref", "")),
            regions=tuple(DamageRegion.from_json(r) for r in data.get("regions", [])),
        )


@dataclass(frozen=True)
class Adjudication:
    reviewer_id: str
    decision: ReviewDecision
    note: str
    decided_at: int

    def to_json(self) -> dict[str, Any]:
        return {
            "reviewer_id": self.reviewer_id,
            "decision": self.decision.value,
            "note": self.note,
            "decided_at": self.decided_at,
        }

    @staticmethod
    def from_json(data: dict[str, Any]) -> "Adjudication":
        return Adjudication(
            reviewer_id=str(data["reviewer_id"]),
            decision=ReviewDecision(data["decision"]),
            note=str(data.get("note", "")),
            decided_at=int(data["decided_at"]),
        )


@dataclass(frozen=True)
class ClaimRecord:
    """One insurance claim with its photo evidence and status lifecycle."""

    claim_id: str
    vehicle_id: str
    submitted_at: int
    status: ClaimStatus = ClaimStatus.PENDING
    evidence: tuple[ImageEvidence, ...] = ()
    adjudication: Adjudication | None = None

    def validate(self) -> None:
        if not self.claim_id:
            raise ValidationError("claim_id must be non-empty", field="claim_id")
        if not self.vehicle_id:
            raise ValidationError("vehicle_id must be non-empty", field="vehicle_id")
        kinds = {e.kind for e in self.evidence}
        if EvidenceKind.FULL_BODY not in kinds:
            raise ValidationError(
                f"claim {self.claim_id} needs at least one full_body image", field="evidence"
            )
        if EvidenceKind.CLOSE_UP not in kinds:
            raise ValidationError(
                f"claim {self.claim_id} needs at least one close_up image", field="evidence"
            )
        seen: set[str] = set()
        for ev in self.evidence:
            if ev.image_id in seen:
                raise ValidationError(
                    f"duplicate image_id {ev.image_id} in claim {self.claim_id}", field="evidence"
                )
            seen.add(ev.image_id)
            ev.validate()

    def with_status(
        self, status: ClaimStatus, adjudication: Adjudication | None = None
    ) -> "ClaimRecord":
        return ClaimRecord(
            claim_id=self.claim_id,
            vehicle_id=self.vehicle_id,
            submitted_at=self.submitted_at,
            status=status,
            evidence=self.evidence,
            adjudication=adjudication if adjudication is not None else self.adjudication,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "vehicle_id": self.vehicle_id,
            "submitted_at": self.submitted_at,
            "status": self.status.value,
            "evidence": [e.to_json() for e in self.evidence],
            "adjudication": None if self.adjudication is None else self.adjudication.to_json(),
        }

    @staticmethod
    def from_json(data: dict[str, Any]) -> "ClaimRecord":
        adj = data.get("adjudication")
        return ClaimRecord(
            claim_id=str(data["claim_id"]),
            vehicle_id=str(data["vehicle_id"]),
            submitted_at=int(data["submitted_at"]),
            status=ClaimStatus(data["status"]),
            evidence=tuple(ImageEvidence.from_json(e) for e in data.get("evidence", [])),
            adjudication=None if adj is None else Adjudication.from_json(adj),
        )


__all__ = [
    "Adjudication",
    "ClaimRecord",
    "ClaimStatus",
    "DamageClass",
    "DamageRegion",
    "EvidenceKind",
    "ImageEvidence",
    "NormalizedBBox",
    "RegionSource",
    "ReviewDecision",
    "STATUS_TRANSITIONS",
]
