"""Shared builders for store/matcher/service tests."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest

# Acceptance tests append (criterion, passed, note) here; the terminal
# summary prints one line per criterion at the end of the run.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, note in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        suffix = f" ({note})" if note else ""
        terminalreporter.write_line(f"{status}: {criterion}{suffix}")

from claimguard.features import FusedDescriptor, FusionConfig, fuse_blocks
from claimguard.model import (
    ClaimRecord,
    ClaimStatus,
    DamageClass,
    DamageRegion,
    EvidenceKind,
    ImageEvidence,
    NormalizedBBox,
)
from claimguard.store import ClaimStore, DescriptorEntry

_claim_counter = itertools.count(1)

# Small layout keeps store/matcher tests fast; imaging tests use real sizes.
TEST_CONFIG = FusionConfig(local_dim=4, global_dim=4, hist_bins=2)


def make_region(cx: float = 0.5, cy: float = 0.5, w: float = 0.4, h: float = 0.4) -> DamageRegion:
    return DamageRegion(
        bbox=NormalizedBBox(cx=cx, cy=cy, w=w, h=h), damage_class=DamageClass.SCRATCH
    )


def make_claim(
    claim_id: str | None = None,
    vehicle_id: str = "V1",
    submitted_at: int = 1_700_000_000_000,
    close_ups: int = 1,
) -> ClaimRecord:
    if claim_id is None:
        claim_id = f"C{next(_claim_counter)}"
    evidence = [
        ImageEvidence(
            image_id=f"{claim_id}-body",
            kind=EvidenceKind.FULL_BODY,
            content_ref=f"/img/{claim_id}-body.png",
        )
    ]
    for i in range(close_ups):
        evidence.append(
            ImageEvidence(
                image_id=f"{claim_id}-close-{i}",
                kind=EvidenceKind.CLOSE_UP,
                content_ref=f"/img/{claim_id}-close-{i}.png",
                regions=(make_region(),),
            )
        )
    return ClaimRecord(
        claim_id=claim_id,
        vehicle_id=vehicle_id,
        submitted_at=submitted_at,
        evidence=tuple(evidence),
    )


def make_descriptor(
    rng: np.random.Generator | None = None,
    config: FusionConfig = TEST_CONFIG,
    values: np.ndarray | None = None,
) -> FusedDescriptor:
    if values is not None:
        return FusedDescriptor(layout=config, values=np.asarray(values, dtype=np.float64))
    assert rng is not None
    blocks = [rng.normal(size=d) for d in config.block_dims if d > 0]
    weights = [w for w, d in zip(config.block_weights, config.block_dims) if d > 0]
    return FusedDescriptor(layout=config, values=fuse_blocks(blocks, weights))


def enroll_one(
    store: ClaimStore,
    claim: ClaimRecord,
    descriptors: list[FusedDescriptor],
) -> str:
    close_up = next(e.image_id for e in claim.evidence if e.kind is EvidenceKind.CLOSE_UP)
    return store.enroll_claim(
        claim, [DescriptorEntry(image_id=close_up, descriptor=d) for d in descriptors]
    )


@pytest.fixture()
def store(tmp_path: Path) -> ClaimStore:
    return ClaimStore(tmp_path / "store", config=TEST_CONFIG)
