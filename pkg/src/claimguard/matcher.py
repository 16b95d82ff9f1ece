"""1-to-N cosine search over the enrolled gallery and fraud-policy scoring.

Two search paths share one contract: `search` is a deliberately naive
per-entry scan kept as the correctness oracle, `search_fast` pre-normalizes
the gallery into a matrix and scans it in blocks with a bounded top-k
selection. Results rank by similarity descending with ties broken by
enrollment_seq ascending, so parallel or blocked merges stay deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatchError, LayoutMismatchError
from .features import FusedDescriptor

if TYPE_CHECKING:
    from .store import ClaimStore, EnrolledFeature

_BLOCK_ROWS = 4096


class FraudMode(str, Enum):
    CROSS_VEHICLE = "cross_vehicle"
    SAME_VEHICLE = "same_vehicle"


@dataclass(frozen=True)
class MatchResult:
    claim_id: str
    vehicle_id: str
    image_id: str
    similarity: float
    rank: int

    def to_json(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "vehicle_id": self.vehicle_id,
            "image_id": self.image_id,
            "similarity": self.similarity,
            "rank": self.rank,
        }


@dataclass(frozen=True)
class FraudPolicy:
    """How a probe's best gallery hit turns into a flag decision."""

    mode: FraudMode = FraudMode.CROSS_VEHICLE
    threshold: float = 0.9
    top_k: int = 10

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not -1.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [-1, 1]")

    def to_json(self) -> dict:
        return {"mode": self.mode.value, "threshold": self.threshold, "top_k": self.top_k}


@dataclass(frozen=True)
class FraudAssessment:
    flagged: bool
    best: MatchResult | None
    matches: tuple[MatchResult, ...]
    policy: FraudPolicy

    def to_json(self) -> dict:
        return {
            "flagged": self.flagged,
            "best": None if self.best is None else self.best.to_json(),
            "matches": [m.to_json() for m in self.matches],
            "policy": self.policy.to_json(),
        }

    @staticmethod
    def from_json(data: dict) -> "FraudAssessment":
        def match(m: dict) -> MatchResult:
            return MatchResult(
                claim_id=m["claim_id"],
                vehicle_id=m["vehicle_id"],
                image_id=m["image_id"],
                similarity=float(m["similarity"]),
                rank=int(m["rank"]),
            )

        policy = data["policy"]
        return FraudAssessment(
            flagged=bool(data["flagged"]),
            best=None if data.get("best") is None else match(data["best"]),
            matches=tuple(match(m) for m in data.get("matches", [])),
            policy=FraudPolicy(
                mode=FraudMode(policy["mode"]),
                threshold=float(policy["threshold"]),
                top_k=int(policy["top_k"]),
            ),
        )


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| |b|), clamped to [-1, 1]; zero-norm operands give 0.

    The zero convention keeps degenerate descriptors (all-black crops under
    the toy embedder) comparable instead of crashing a claim check.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"cosine operands have dims {va.shape} and {vb.shape}")
    norm_a = np.linalg.norm(va)
    norm_b = np.linalg.norm(vb)
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.clip(np.dot(va, vb) / (norm_a * norm_b), -1.0, 1.0))


def _check_layout(probe: FusedDescriptor, entry: "EnrolledFeature") -> None:
    if not probe.layout.same_layout(entry.descriptor.layout):
        raise LayoutMismatchError(
            f"gallery entry {entry.claim_id}/{entry.image_id} has layout "
            f"{entry.descriptor.layout.block_dims}, probe has {probe.layout.block_dims}"
        )


def search(
    probe: FusedDescriptor,
    gallery: Sequence["EnrolledFeature"],
    k: int,
    gallery_filter: Callable[["EnrolledFeature"], bool] | None = None,
) -> list[MatchResult]:
    """Naive oracle scan: one cosine per gallery entry, then sort and cut."""
    scored: list[tuple[float, int, "EnrolledFeature"]] = []
    for entry in gallery:
        if gallery_filter is not None and not gallery_filter(entry):
            continue
        _check_layout(probe, entry)
        sim = cosine_similarity(probe.values, entry.descriptor.values)
        scored.append((sim, entry.enrollment_seq, entry))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [
        MatchResult(
            claim_id=entry.claim_id,
            vehicle_id=entry.vehicle_id,
            image_id=entry.image_id,
            similarity=sim,
            rank=rank,
        )
        for rank, (sim, _, entry) in enumerate(scored[: max(k, 0)], start=1)
    ]


def _normalized_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


def search_fast(
    probe: FusedDescriptor,
    gallery: Sequence["EnrolledFeature"],
    k: int,
    gallery_filter: Callable[["EnrolledFeature"], bool] | None = None,
) -> list[MatchResult]:
    """Blocked matrix scan with the same contract as `search`."""
    if gallery_filter is not None:
        gallery = [entry for entry in gallery if gallery_filter(entry)]
    if not gallery or k < 1:
        return []
    for entry in gallery:
        _check_layout(probe, entry)

    probe_vec = np.asarray(probe.values, dtype=np.float64)
    probe_norm = np.linalg.norm(probe_vec)
    unit_probe = probe_vec / probe_norm if probe_norm > 0.0 else probe_vec

    # (similarity, seq, gallery index) candidates surviving each block.
    candidates: list[tuple[float, int, int]] = []
    for start in range(0, len(gallery), _BLOCK_ROWS):
        block = gallery[start : start + _BLOCK_ROWS]
        matrix = np.stack([np.asarray(e.descriptor.values, dtype=np.float64) for e in block])
        if probe_norm == 0.0:
            sims = np.zeros(len(block))
        else:
            sims = _normalized_rows(matrix) @ unit_probe
            np.clip(sims, -1.0, 1.0, out=sims)
        keep = min(k, len(block))
        top = np.argpartition(-sims, keep - 1)[:keep]
        candidates.extend(
            (float(sims[i]), block[i].enrollment_seq, start + int(i)) for i in top
        )
    candidates.sort(key=lambda item: (-item[0], item[1]))
    return [
        MatchResult(
            claim_id=gallery[idx].claim_id,
            vehicle_id=gallery[idx].vehicle_id,
            image_id=gallery[idx].image_id,
            similarity=sim,
            rank=rank,
        )
        for rank, (sim, _, idx) in enumerate(candidates[:k], start=1)
    ]


def fraud_check(
    probe_claim_id: str,
    probe_vehicle_id: str,
    probe_descriptors: Sequence[FusedDescriptor],
    store: "ClaimStore",
    policy: FraudPolicy | None = None,
) -> FraudAssessment:
    """Score a claim's descriptors against the enrolled history.

    The probe's own claim is always excluded; same_vehicle mode restricts
    the gallery to the probe's vehicle. Each gallery entry scores as the
    max similarity over all probe descriptors; the claim flags when the
    best hit reaches the policy threshold.
    """
    from .store import GalleryFilter  # store imports matcher types; keep the cycle one-way

    policy = policy or FraudPolicy()
    gallery = store.list_gallery(
        GalleryFilter(
            exclude_claim=probe_claim_id,
            only_vehicle=probe_vehicle_id if policy.mode is FraudMode.SAME_VEHICLE else None,
        )
    )
    if not gallery or not probe_descriptors:
        return FraudAssessment(flagged=False, best=None, matches=(), policy=policy)
    for descriptor in probe_descriptors:
        _check_layout(descriptor, gallery[0])

    matrix = _normalized_rows(
        np.stack([np.asarray(e.descriptor.values, dtype=np.float64) for e in gallery])
    )
    probes = _normalized_rows(
        np.stack([np.asarray(d.values, dtype=np.float64) for d in probe_descriptors])
    )
    zero_probe = np.linalg.norm(probes, axis=1) == 0.0
    sims = matrix @ probes.T
    sims[:, zero_probe] = 0.0
    zero_entry = np.linalg.norm(matrix, axis=1) == 0.0
    sims[zero_entry, :] = 0.0
    best_per_entry = np.clip(sims.max(axis=1), -1.0, 1.0)

    scored = sorted(
        ((float(best_per_entry[i]), entry.enrollment_seq, entry) for i, entry in enumerate(gallery)),
        key=lambda item: (-item[0], item[1]),
    )
    matches = tuple(
        MatchResult(
            claim_id=entry.claim_id,
            vehicle_id=entry.vehicle_id,
            image_id=entry.image_id,
            similarity=sim,
            rank=rank,
        )
        for rank, (sim, _, entry) in enumerate(scored[: policy.top_k], start=1)
    )
    best = matches[0] if matches else None
    flagged = best is not None and best.similarity >= policy.threshold
    return FraudAssessment(flagged=flagged, best=best, matches=matches, policy=policy)
