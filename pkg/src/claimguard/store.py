"""Persistent claim-history store: records, descriptors, status lifecycle.

Claim history is audit-sensitive, so every mutation appends one
length-prefixed record to `log.bin`; replaying the log reproduces the full
state, and `snapshot.bin` is a compact checkpoint that must always equal
the replay. Descriptor vectors live in `features.f32` as little-endian
32-bit floats under a self-describing header (block dims and weights), one
row per enrollment_seq, so the evaluation CLI can read galleries bit-exact.

Concurrency: single writer, many readers. All mutations serialize through
one lock; reads hand out immutable snapshots that stay valid while writers
append.
"""

from __future__ import annotations

import json
import os
import struct
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    DuplicateClaimError,
    IllegalTransitionError,
    LayoutMismatchError,
    NotFoundError,
    StorageError,
    ValidationError,
)
from .features import FusedDescriptor, FusionConfig
from .model import (
    Adjudication,
    ClaimRecord,
    ClaimStatus,
    EvidenceKind,
    STATUS_TRANSITIONS,
)

FEATURES_MAGIC = b"CGF1"
SNAPSHOT_MAGIC = b"CGS1"
SNAPSHOT_VERSION = 1

LOG_FILE = "log.bin"
SNAPSHOT_FILE = "snapshot.bin"
FEATURES_FILE = "features.f32"


def now_ms() -> int:
    return int(time.time() * 1000)


@dataclass(frozen=True)
class EnrolledFeature:
    """One gallery row: a fused descriptor tied back to its claim evidence."""

    claim_id: str
    vehicle_id: str
    image_id: str
    descriptor: FusedDescriptor
    enrolled_at: int
    enrollment_seq: int


@dataclass(frozen=True)
class DescriptorEntry:
    """Enrollment input: which close-up a descriptor's local block came from."""

    image_id: str
    descriptor: FusedDescriptor


@dataclass(frozen=True)
class GalleryFilter:
    """Conjunction of gallery restrictions; None fields match everything."""

    exclude_claim: str | None = None
    only_vehicle: str | None = None
    exclude_vehicle: str | None = None
    status_in: frozenset[ClaimStatus] | None = None

    def matches(self, feature: EnrolledFeature, status: ClaimStatus) -> bool:
        if self.exclude_claim is not None and feature.claim_id == self.exclude_claim:
            return False
        if self.only_vehicle is not None and feature.vehicle_id != self.only_vehicle:
            return False
        if self.exclude_vehicle is not None and feature.vehicle_id == self.exclude_vehicle:
            return False
        if self.status_in is not None and status not in self.status_in:
            return False
        return True


class _FeatureFile:
    """Row-addressed f32 vector storage under the CGF1 header."""

    def __init__(self, path: Path, config: FusionConfig) -> None:
        self.path = path
        self.config = config
        self.row_dim = config.total_dim
        self.header_size = 4 + 4 + 3 * (4 + 4)

    @staticmethod
    def create(path: Path, config: FusionConfig) -> "_FeatureFile":
        with open(path, "wb") as fh:
            fh.write(FEATURES_MAGIC)
            fh.write(struct.pack("<I", 3))
            for dim, weight in zip(config.block_dims, config.block_weights):
                fh.write(struct.pack("<If", dim, weight))
        return _FeatureFile(path, config)

    @staticmethod
    def open(path: Path) -> "_FeatureFile":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != FEATURES_MAGIC:
                raise StorageError(f"bad feature file magic {magic!r} in {path}")
            (block_count,) = struct.unpack("<I", fh.read(4))
            if block_count != 3:
                raise StorageError(f"feature file {path} has {block_count} blocks, expected 3")
            dims: list[int] = []
            weights: list[float] = []
            for _ in range(block_count):
                dim, weight = struct.unpack("<If", fh.read(8))
                dims.append(dim)
                weights.append(weight)
        if dims[2] % 3 != 0:
            raise StorageError(f"histogram block dim {dims[2]} is not a multiple of 3")
        config = FusionConfig(
            local_dim=dims[0],
            global_dim=dims[1],
            hist_bins=dims[2] // 3,
            block_weights=(weights[0], weights[1], weights[2]),
        )
        return _FeatureFile(path, config)

    def write_row(self, seq: int, values: np.ndarray) -> None:
        data = np.asarray(values, dtype="<f4").tobytes()
        with open(self.path, "r+b") as fh:
            fh.seek(self.header_size + seq * self.row_dim * 4)
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())

    def read_row(self, seq: int) -> np.ndarray:
        with open(self.path, "rb") as fh:
            fh.seek(self.header_size + seq * self.row_dim * 4)
            raw = fh.read(self.row_dim * 4)
        if len(raw) != self.row_dim * 4:
            raise StorageError(f"feature row {seq} truncated in {self.path}")
        return np.frombuffer(raw, dtype="<f4").astype(np.float32)


class _EventLog:
    """Append-only log of length-prefixed JSON records."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self.path.touch(exist_ok=True)

    def append(self, event: dict[str, Any]) -> None:
        payload = json.dumps(event, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(self.path, "r+b") as fh:
            fh.seek(self._valid_end(fh))
            fh.write(struct.pack("<I", len(payload)))
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())

    def read_all(self) -> list[dict[str, Any]]:
        events: list[dict[str, Any]] = []
        with open(self.path, "rb") as fh:
            while True:
                header = fh.read(4)
                if len(header) < 4:
                    break
                (length,) = struct.unpack("<I", header)
                payload = fh.read(length)
                if len(payload) < length:
                    break  # torn tail record from an interrupted write
                events.append(json.loads(payload.decode("utf-8")))
        return events

    def _valid_end(self, fh) -> int:
        """Byte offset just past the last complete record."""
        fh.seek(0)
        offset = 0
        while True:
            header = fh.read(4)
            if len(header) < 4:
                return offset
            (length,) = struct.unpack("<I", header)
            payload = fh.read(length)
            if len(payload) < length:
                return offset
            offset += 4 + length


class ClaimStore:
    """Claim records plus their enrolled descriptors, durable before return."""

    def __init__(
        self,
        directory: str | Path,
        config: FusionConfig | None = None,
        clock: Callable[[], int] = now_ms,
    ) -> None:
        self.directory = Path(directory)
        self._clock = clock
        self._lock = threading.RLock()
        self._claims: dict[str, ClaimRecord] = {}
        self._features: list[EnrolledFeature] = []
        self._audit: list[dict[str, Any]] = []
        self._details: dict[str, dict[str, Any]] = {}
        self._next_seq = 0
        self._event_count = 0

        self.directory.mkdir(parents=True, exist_ok=True)
        features_path = self.directory / FEATURES_FILE
        if features_path.exists():
            self._vectors = _FeatureFile.open(features_path)
            if config is not None and not config.same_layout(self._vectors.config):
                raise LayoutMismatchError(
                    f"store at {self.directory} holds layout "
                    f"{self._vectors.config.block_dims}, requested {config.block_dims}"
                )
        else:
            if config is None:
                config = FusionConfig()
            self._vectors = _FeatureFile.create(features_path, config)
        self._log = _EventLog(self.directory / LOG_FILE)
        self._load()

    @property
    def config(self) -> FusionConfig:
        return self._vectors.config

    # ------------------------------------------------------------------ load

    def _load(self) -> None:
        events = self._log.read_all()
        start = 0
        snapshot = self._read_snapshot()
        # A snapshot claiming more history than the log holds is stale or the
        # log was truncated; the log is authoritative, so replay everything.
        if snapshot is not None and snapshot[0] <= len(events):
            event_count, state = snapshot
            self._restore_state(state)
            self._event_count = event_count
            start = event_count
        for event in events[start:]:
            self._apply(event)
            self._event_count += 1

    def _restore_state(self, state: dict[str, Any]) -> None:
        self._claims = {}
        for claim_json in state["claims"]:
            record = ClaimRecord.from_json(claim_json)
            self._claims[record.claim_id] = record
        self._features = []
        for meta in state["features"]:
            self._features.append(self._feature_from_meta(meta))
        self._next_seq = int(state["next_seq"])
        self._audit = list(state.get("audit", []))
        self._details = dict(state.get("details", {}))

    def _feature_from_meta(self, meta: dict[str, Any]) -> EnrolledFeature:
        seq = int(meta["seq"])
        values = self._vectors.read_row(seq)
        values.setflags(write=False)
        return EnrolledFeature(
            claim_id=str(meta["claim_id"]),
            vehicle_id=str(meta["vehicle_id"]),
            image_id=str(meta["image_id"]),
            descriptor=FusedDescriptor(layout=self.config, values=values),
            enrolled_at=int(meta["enrolled_at"]),
            enrollment_seq=seq,
        )

    def _apply(self, event: dict[str, Any]) -> None:
        kind = event["type"]
        if kind == "enroll":
            record = ClaimRecord.from_json(event["claim"])
            self._claims[record.claim_id] = record
            for meta in event["features"]:
                feature = self._feature_from_meta(
                    {**meta, "claim_id": record.claim_id, "vehicle_id": record.vehicle_id}
                )
                self._features.append(feature)
                self._next_seq = max(self._next_seq, feature.enrollment_seq + 1)
            self._audit.append(
                {"at": event["at"], "claim_id": record.claim_id, "event": "enroll"}
            )
        elif kind == "status":
            claim_id = event["claim_id"]
            record = self._claims[claim_id]
            adjudication = (
                None
                if event.get("adjudication") is None
                else Adjudication.from_json(event["adjudication"])
            )
            self._claims[claim_id] = record.with_status(
                ClaimStatus(event["new"]), adjudication
            )
            if event.get("detail") is not None:
                self._details[claim_id] = event["detail"]
            self._audit.append(
                {
                    "at": event["at"],
                    "claim_id": claim_id,
                    "event": "status",
                    "old": event["old"],
                    "new": event["new"],
                }
            )
        else:
            raise StorageError(f"unknown log event type {kind!r}")

    # ------------------------------------------------------------- snapshot

    def _state_json(self) -> dict[str, Any]:
        return {
            "claims": [self._claims[cid].to_json() for cid in self._claims],
            "features": [
                {
                    "claim_id": f.claim_id,
                    "vehicle_id": f.vehicle_id,
                    "image_id": f.image_id,
                    "enrolled_at": f.enrolled_at,
                    "seq": f.enrollment_seq,
                }
                for f in self._features
            ],
            "next_seq": self._next_seq,
            "audit": self._audit,
            "details": self._details,
        }

    def write_snapshot(self) -> None:
        """Checkpoint current state; replaying the log must reproduce it."""
        with self._lock:
            payload = zlib.compress(
                json.dumps(self._state_json(), sort_keys=True, separators=(",", ":")).encode(
                    "utf-8"
                )
            )
            tmp = self.directory / (SNAPSHOT_FILE + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(SNAPSHOT_MAGIC)
                fh.write(struct.pack("<IQ", SNAPSHOT_VERSION, self._event_count))
                fh.write(struct.pack("<I", len(payload)))
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.directory / SNAPSHOT_FILE)

    def _read_snapshot(self) -> tuple[int, dict[str, Any]] | None:
        path = self.directory / SNAPSHOT_FILE
        if not path.exists():
            return None
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != SNAPSHOT_MAGIC:
                raise StorageError(f"bad snapshot magic {magic!r} in {path}")
            version, event_count = struct.unpack("<IQ", fh.read(12))
            if version != SNAPSHOT_VERSION:
                raise StorageError(f"unsupported snapshot version {version}")
            (length,) = struct.unpack("<I", fh.read(4))
            payload = fh.read(length)
        if len(payload) != length:
            raise StorageError(f"truncated snapshot {path}")
        return event_count, json.loads(zlib.decompress(payload).decode("utf-8"))

    def close(self) -> None:
        self.write_snapshot()

    def __enter__(self) -> "ClaimStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    # ------------------------------------------------------------ operations

    def enroll_claim(self, record: ClaimRecord, entries: Sequence[DescriptorEntry]) -> str:
        """Persist a new claim and its descriptors; durable before return."""
        record.validate()
        if record.status is not ClaimStatus.PENDING:
            raise ValidationError(
                f"claims enroll as pending, got status {record.status.value}", field="status"
            )
        close_up_ids = {
            e.image_id for e in record.evidence if e.kind is EvidenceKind.CLOSE_UP
        }
        for entry in entries:
            if not entry.descriptor.layout.same_layout(self.config):
                raise LayoutMismatchError(
                    f"descriptor layout {entry.descriptor.layout.block_dims} does not match "
                    f"store layout {self.config.block_dims}"
                )
            if entry.image_id not in close_up_ids:
                raise ValidationError(
                    f"descriptor references {entry.image_id}, not a close_up of this claim",
                    field="descriptors",
                )
        with self._lock:
            if record.claim_id in self._claims:
                raise DuplicateClaimError(f"claim {record.claim_id} already enrolled")
            at = self._clock()
            metas = []
            features = []
            for entry in entries:
                seq = self._next_seq + len(metas)
                values = np.asarray(entry.descriptor.values, dtype=np.float32)
                self._vectors.write_row(seq, values)
                stored = self._vectors.read_row(seq)
                stored.setflags(write=False)
                metas.append({"image_id": entry.image_id, "seq": seq, "enrolled_at": at})
                features.append(
                    EnrolledFeature(
                        claim_id=record.claim_id,
                        vehicle_id=record.vehicle_id,
                        image_id=entry.image_id,
                        descriptor=FusedDescriptor(layout=self.config, values=stored),
                        enrolled_at=at,
                        enrollment_seq=seq,
                    )
                )
            self._log.append(
                {"type": "enroll", "at": at, "claim": record.to_json(), "features": metas}
            )
            self._claims[record.claim_id] = record
            self._features.extend(features)
            self._next_seq += len(features)
            self._event_count += 1
            self._audit.append({"at": at, "claim_id": record.claim_id, "event": "enroll"})
        return record.claim_id

    def get_claim(self, claim_id: str) -> ClaimRecord:
        with self._lock:
            record = self._claims.get(claim_id)
        if record is None:
            raise NotFoundError(f"unknown claim {claim_id}")
        return record

    def has_claim(self, claim_id: str) -> bool:
        with self._lock:
            return claim_id in self._claims

    def claim_ids(self) -> list[str]:
        with self._lock:
            return list(self._claims)

    def list_gallery(self, gallery_filter: GalleryFilter | None = None) -> list[EnrolledFeature]:
        """Enrolled features matching the filter, by enrollment_seq ascending."""
        with self._lock:
            features = list(self._features)
            statuses = {cid: rec.status for cid, rec in self._claims.items()}
        if gallery_filter is None:
            return features
        return [f for f in features if gallery_filter.matches(f, statuses[f.claim_id])]

    def set_status(
        self,
        claim_id: str,
        status: ClaimStatus,
        adjudication: Adjudication | None = None,
        detail: dict[str, Any] | None = None,
    ) -> ClaimRecord:
        """Move a claim along the lifecycle; appends an audit entry."""
        with self._lock:
            record = self._claims.get(claim_id)
            if record is None:
                raise NotFoundError(f"unknown claim {claim_id}")
            if status not in STATUS_TRANSITIONS[record.status]:
                raise IllegalTransitionError(claim_id, record.status.value, status.value)
            at = self._clock()
            updated = record.with_status(status, adjudication)
            self._log.append(
                {
                    "type": "status",
                    "at": at,
                    "claim_id": claim_id,
                    "old": record.status.value,
                    "new": status.value,
                    "adjudication": None if adjudication is None else adjudication.to_json(),
                    "detail": detail,
                }
            )
            self._claims[claim_id] = updated
            if detail is not None:
                self._details[claim_id] = detail
            self._event_count += 1
            self._audit.append(
                {
                    "at": at,
                    "claim_id": claim_id,
                    "event": "status",
                    "old": record.status.value,
                    "new": status.value,
                }
            )
        return updated

    def claims_with_status(self, status: ClaimStatus) -> list[ClaimRecord]:
        with self._lock:
            return [rec for rec in self._claims.values() if rec.status is status]

    def status_detail(self, claim_id: str) -> dict[str, Any] | None:
        """Payload recorded with the claim's latest detailed status change."""
        with self._lock:
            return self._details.get(claim_id)

    def audit_log(self, claim_id: str | None = None) -> list[dict[str, Any]]:
        with self._lock:
            entries = list(self._audit)
        if claim_id is None:
            return entries
        return [e for e in entries if e["claim_id"] == claim_id]

    def gallery_size(self) -> int:
        with self._lock:
            return len(self._features)


def rebuild_from_log(directory: str | Path) -> dict[str, Any]:
    """Replay the full log only (ignoring any snapshot) and return the state.

    Exists so tests and audits can verify the snapshot invariant: a snapshot
    must always equal the state rebuilt from the log.
    """
    directory = Path(directory)
    store = ClaimStore.__new__(ClaimStore)
    store.directory = directory
    store._clock = now_ms
    store._lock = threading.RLock()
    store._claims = {}
    store._features = []
    store._audit = []
    store._details = {}
    store._next_seq = 0
    store._event_count = 0
    store._vectors = _FeatureFile.open(directory / FEATURES_FILE)
    store._log = _EventLog(directory / LOG_FILE)
    for event in store._log.read_all():
        store._apply(event)
        store._event_count += 1
    return store._state_json()
