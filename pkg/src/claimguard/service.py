"""Claim-intake and fraud-check HTTP API.

Resource-oriented JSON endpoints, a thin layer over the store, matcher and
pipeline modules:

    POST /claims                   submit evidence, optional auto fraud check
    GET  /claims/{id}              stored record
    POST /claims/{id}/check        read-only fraud check with policy overrides
    GET  /review/queue             flagged claims by best-match similarity
    POST /claims/{id}/adjudicate   reviewer decision: fraud | legitimate
    GET  /evidence/{claim}/{image} evidence bytes for the review console
    GET  /healthz

Errors use one body shape: {code, message, details}. Validation problems
are 4xx; pipeline failures are 5xx and name the failing stage. A failed
submission enrolls nothing.
"""

from __future__ import annotations

import base64
import binascii
import uuid
from pathlib import Path
from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .config import AppConfig
from .errors import (
    ClaimGuardError,
    DuplicateClaimError,
    IllegalTransitionError,
    NotFoundError,
    PipelineError,
    ValidationError,
)
from .matcher import FraudAssessment, FraudMode, FraudPolicy, fraud_check
from .model import (
    Adjudication,
    ClaimRecord,
    ClaimStatus,
    DamageRegion,
    EvidenceKind,
    ImageEvidence,
    ReviewDecision,
)
from .pipeline import DescriptorPipeline, decode_evidence
from .store import ClaimStore, now_ms

_STATUS_BY_CODE = {
    "validation": 422,
    "duplicate_claim": 409,
    "not_found": 404,
    "illegal_transition": 409,
    "layout_mismatch": 422,
    "decode": 422,
    "empty_roi": 422,
    "dimension_mismatch": 422,
    "missing_embedding": 422,
    "config": 500,
    "storage": 500,
    "pipeline": 500,
}


class EvidenceIn(BaseModel):
    kind: Literal["full_body", "close_up"]
    image_id: str | None = None
    image_b64: str | None = None
    content_ref: str | None = None
    regions: list[dict[str, Any]] = Field(default_factory=list)


class SubmissionIn(BaseModel):
    vehicle_id: str
    evidence: list[EvidenceIn]
    auto_check: bool = True
    claim_id: str | None = None


class CheckIn(BaseModel):
    threshold: float | None = None
    mode: Literal["cross_vehicle", "same_vehicle"] | None = None
    top_k: int | None = None


class AdjudicateIn(BaseModel):
    decision: Literal["fraud", "legitimate"]
    reviewer_id: str
    note: str = ""


def _error_response(code: str, message: str, status: int, details: dict | None = None):
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details or {}},
    )


def create_app(config: AppConfig, store: ClaimStore | None = None) -> FastAPI:
    app = FastAPI(title="claimguard", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    if store is None:
        store = ClaimStore(config.store_path, config=config.fusion)
    pipeline = DescriptorPipeline(
        config.build_provider(), config.fusion, hist_source=config.hist_source  # type: ignore[arg-type]
    )
    assets_root = Path(config.store_path).resolve().parent
    app.state.store = store
    app.state.config = config

    @app.exception_handler(ClaimGuardError)
    async def domain_error_handler(_request: Request, exc: ClaimGuardError):
        details: dict[str, Any] = {}
        if isinstance(exc, PipelineError):
            details["stage"] = exc.stage
        if isinstance(exc, ValidationError) and exc.field:
            details["field"] = exc.field
        return _error_response(exc.code, str(exc), _STATUS_BY_CODE.get(exc.code, 500), details)

    def resolve_ref(content_ref: str) -> Path:
        path = Path(content_ref)
        if not path.is_absolute():
            path = assets_root / path
        return path

    def load_payloads(evidence: list[EvidenceIn]) -> dict[str, bytes]:
        payloads: dict[str, bytes] = {}
        for item in evidence:
            assert item.image_id is not None
            if item.image_b64 is not None:
                try:
                    data = base64.b64decode(item.image_b64, validate=True)
                except (binascii.Error, ValueError) as exc:
                    raise ValidationError(
                        f"evidence {item.image_id}: invalid base64 image data", field="image_b64"
                    ) from exc
            elif item.content_ref:
                path = resolve_ref(item.content_ref)
                if not path.exists():
                    raise ValidationError(
                        f"evidence {item.image_id}: content_ref not found: {item.content_ref}",
                        field="content_ref",
                    )
                data = path.read_bytes()
            else:
                raise ValidationError(
                    f"evidence {item.image_id}: needs image_b64 or content_ref", field="evidence"
                )
            if len(data) > config.max_image_bytes:
                raise ValidationError(
                    f"evidence {item.image_id}: image exceeds {config.max_image_bytes} bytes",
                    field="evidence",
                )
            payloads[item.image_id] = data
        return payloads

    def build_record(body: SubmissionIn) -> ClaimRecord:
        evidence = []
        for index, item in enumerate(body.evidence):
            if item.image_id is None:
                item.image_id = f"img-{index}"
            evidence.append(
                ImageEvidence(
                    image_id=item.image_id,
                    kind=EvidenceKind(item.kind),
                    content_ref=item.content_ref or f"inline:{item.image_id}",
                    regions=tuple(DamageRegion.from_json(r) for r in item.regions),
                )
            )
        record = ClaimRecord(
            claim_id=body.claim_id or f"claim-{uuid.uuid4().hex[:12]}",
            vehicle_id=body.vehicle_id,
            submitted_at=now_ms(),
            evidence=tuple(evidence),
        )
        record.validate()
        return record

    def claim_summary(record: ClaimRecord) -> dict[str, Any]:
        return {
            "claim_id": record.claim_id,
            "vehicle_id": record.vehicle_id,
            "submitted_at": record.submitted_at,
            "status": record.status.value,
            "evidence": [
                {
                    "image_id": e.image_id,
                    "kind": e.kind.value,
                    "image_url": f"/evidence/{record.claim_id}/{e.image_id}",
                    "regions": [r.to_json() for r in e.regions],
                }
                for e in record.evidence
            ],
        }

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "gallery_size": store.gallery_size()}

    @app.post("/claims", status_code=201)
    def submit_claim(body: SubmissionIn) -> dict[str, Any]:
        record = build_record(body)
        if store.has_claim(record.claim_id):
            raise DuplicateClaimError(f"claim {record.claim_id} already exists")
        payloads = load_payloads(body.evidence)
        images = decode_evidence(payloads)
        try:
            entries = pipeline.entries_for_claim(record, images)
        except ClaimGuardError:
            raise
        except Exception as exc:  # pipeline stage failure, nothing enrolled
            raise PipelineError("descriptor", str(exc)) from exc
        assessment = fraud_check(
            record.claim_id,
            record.vehicle_id,
            [e.descriptor for e in entries],
            store,
            config.policy,
        )
        store.enroll_claim(record, entries)
        if assessment.flagged:
            store.set_status(record.claim_id, ClaimStatus.FLAGGED, detail=assessment.to_json())
        response: dict[str, Any] = {"claim_id": record.claim_id}
        if body.auto_check:
            response["assessment"] = assessment.to_json()
        return response

    @app.get("/claims/{claim_id}")
    def get_claim(claim_id: str) -> dict[str, Any]:
        return store.get_claim(claim_id).to_json()

    @app.post("/claims/{claim_id}/check")
    def check_claim(claim_id: str, body: CheckIn | None = None) -> dict[str, Any]:
        record = store.get_claim(claim_id)
        descriptors = [f.descriptor for f in store.list_gallery() if f.claim_id == claim_id]
        if not descriptors:
            raise ValidationError(f"claim {claim_id} has no enrolled descriptors")
        policy = config.policy
        if body is not None:
            policy = FraudPolicy(
                mode=FraudMode(body.mode) if body.mode else policy.mode,
                threshold=body.threshold if body.threshold is not None else policy.threshold,
                top_k=body.top_k if body.top_k is not None else policy.top_k,
            )
        assessment = fraud_check(claim_id, record.vehicle_id, descriptors, store, policy)
        return assessment.to_json()

    @app.get("/review/queue")
    def review_queue(page: int = 1, page_size: int = 20) -> dict[str, Any]:
        if page < 1 or page_size < 1:
            raise ValidationError("page and page_size must be >= 1", field="page")
        flagged = store.claims_with_status(ClaimStatus.FLAGGED)
        items = []
        for record in flagged:
            detail = store.status_detail(record.claim_id)
            if detail is None:
                continue
            assessment = FraudAssessment.from_json(detail)
            best = assessment.best.similarity if assessment.best else -1.0
            matched_refs = []
            for match in assessment.matches:
                try:
                    matched = store.get_claim(match.claim_id)
                except NotFoundError:
                    continue
                matched_refs.append(claim_summary(matched))
            items.append(
                {
                    "claim": claim_summary(record),
                    "assessment": detail,
                    "best_similarity": best,
                    "matched_claims": matched_refs,
                }
            )
        items.sort(key=lambda item: (-item["best_similarity"], item["claim"]["claim_id"]))
        start = (page - 1) * page_size
        return {
            "page": page,
            "page_size": page_size,
            "total": len(items),
            "items": items[start : start + page_size],
        }

    @app.post("/claims/{claim_id}/adjudicate")
    def adjudicate(claim_id: str, body: AdjudicateIn) -> dict[str, Any]:
        record = store.get_claim(claim_id)
        if record.status is not ClaimStatus.FLAGGED:
            raise IllegalTransitionError(claim_id, record.status.value, "adjudicated")
        decision = ReviewDecision(body.decision)
        new_status = (
            ClaimStatus.FRAUD_CONFIRMED
            if decision is ReviewDecision.FRAUD
            else ClaimStatus.CLEARED
        )
        updated = store.set_status(
            claim_id,
            new_status,
            adjudication=Adjudication(
                reviewer_id=body.reviewer_id,
                decision=decision,
                note=body.note,
                decided_at=now_ms(),
            ),
        )
        return updated.to_json()

    @app.get("/evidence/{claim_id}/{image_id}")
    def evidence_bytes(claim_id: str, image_id: str) -> Response:
        record = store.get_claim(claim_id)
        match = next((e for e in record.evidence if e.image_id == image_id), None)
        if match is None:
            raise NotFoundError(f"claim {claim_id} has no image {image_id}")
        path = resolve_ref(match.content_ref)
        if not path.exists():
            raise NotFoundError(f"evidence bytes missing at {match.content_ref}")
        media = "image/png" if path.suffix.lower() == ".png" else "image/jpeg"
        return Response(content=path.read_bytes(), media_type=media)

    console_dist = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    if console_dist.is_dir():
        app.mount("/", StaticFiles(directory=console_dist, html=True), name="console")

    return app
