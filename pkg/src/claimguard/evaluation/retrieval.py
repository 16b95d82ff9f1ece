"""Retrieval evaluation: CMC curves and feature-fusion ablation runs.

A probe's correct match is any gallery entry from the same vehicle; the
curve value at rank k is the fraction of probes whose first correct match
appears within the top k results under the matcher's search ordering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

from ..errors import ValidationError
from ..features import FusedDescriptor, FusionConfig
from ..imaging import ImageBuffer, decode_image
from ..matcher import search
from ..pipeline import CasePair, DescriptorPipeline
from ..store import EnrolledFeature
from .detection import Detection
from .io import DatasetImage, DatasetIndex, read_detections
from .splits import make_probe_gallery

logger = logging.getLogger(__name__)

RoiSource = Literal["annotation", "detector"]


@dataclass(frozen=True)
class CmcCurve:
    rates: tuple[float, ...]
    probe_count: int

    def rank(self, k: int) -> float:
        return self.rates[k - 1]


@dataclass(frozen=True)
class AblationConfig:
    label: str
    fusion: FusionConfig
    roi_source: RoiSource = "annotation"


@dataclass(frozen=True)
class AblationRow:
    label: str
    fusion: FusionConfig
    roi_source: str
    rank1: float
    rank10: float
    probe_count: int


def cmc(
    probes: Sequence[DatasetImage],
    gallery: Sequence[DatasetImage],
    max_rank: int,
    descriptor_fn: Callable[[DatasetImage], FusedDescriptor],
) -> CmcCurve:
    """Cumulative match characteristic over the first max_rank ranks."""
    if not probes:
        raise ValidationError("cmc needs at least one probe")
    entries = [
        EnrolledFeature(
            claim_id=image.vehicle_id,
            vehicle_id=image.vehicle_id,
            image_id=image.image_id,
            descriptor=descriptor_fn(image),
            enrolled_at=0,
            enrollment_seq=seq,
        )
        for seq, image in enumerate(gallery)
    ]
    gallery_vehicles = {image.vehicle_id for image in gallery}

    first_correct: list[int | None] = []
    for probe in probes:
        if probe.vehicle_id not in gallery_vehicles:
            logger.warning(
                "probe %s: vehicle %s absent from gallery, counted as never matched",
                probe.image_id,
                probe.vehicle_id,
            )
            first_correct.append(None)
            continue
        results = search(descriptor_fn(probe), entries, k=len(entries))
        hit = next((r.rank for r in results if r.vehicle_id == probe.vehicle_id), None)
        first_correct.append(hit)

    rates = tuple(
        sum(1 for rank in first_correct if rank is not None and rank <= k) / len(probes)
        for k in range(1, max_rank + 1)
    )
    return CmcCurve(rates=rates, probe_count=len(probes))


class _FixtureDescriptorCache:
    """Builds per-close-up descriptors from a dataset directory, caching decodes."""

    def __init__(
        self,
        dataset: DatasetIndex,
        pipeline: DescriptorPipeline,
        roi_source: RoiSource,
        detections: dict[str, list[Detection]] | None,
    ) -> None:
        self.dataset = dataset
        self.pipeline = pipeline
        self.roi_source = roi_source
        self.detections = detections
        self._images: dict[str, ImageBuffer] = {}
        self._descriptors: dict[str, FusedDescriptor] = {}

    def image(self, entry: DatasetImage) -> ImageBuffer:
        if entry.image_id not in self._images:
            self._images[entry.image_id] = decode_image(
                self.dataset.image_path(entry).read_bytes()
            )
        return self._images[entry.image_id]

    def roi_bbox(self, entry: DatasetImage):
        if self.roi_source == "annotation":
            if not entry.regions:
                raise ValidationError(f"close-up {entry.image_id} has no annotated region")
            return entry.regions[0].bbox
        assert self.detections is not None
        boxes = self.detections.get(entry.image_id)
        if not boxes:
            raise ValidationError(f"detector output has no box for image {entry.image_id}")
        return max(boxes, key=lambda d: d.confidence).bbox

    def descriptor(self, entry: DatasetImage) -> FusedDescriptor:
        if entry.image_id not in self._descriptors:
            body = self.dataset.body_for_case(entry.vehicle_id, entry.case)
            case = CasePair(
                body_id=body.image_id,
                body=self.image(body),
                close_up_id=entry.image_id,
                close_up=self.image(entry),
            )
            self._descriptors[entry.image_id] = self.pipeline.descriptor_for_region(
                case, self.roi_bbox(entry)
            )
        return self._descriptors[entry.image_id]


def ablation_run(
    dataset: DatasetIndex,
    configs: Sequence[AblationConfig],
    seed: int,
    provider_factory: Callable[[FusionConfig], object],
    detector_file: str | None = None,
    max_rank: int = 10,
    hist_source: str = "full_body",
) -> list[AblationRow]:
    """Rank-1/rank-10 per fusion config under one probe/gallery split.

    The probe/gallery selection is drawn once from the seed so every config
    row scores the same retrieval problem.
    """
    split = make_probe_gallery(dataset, seed)
    detections: dict[str, list[Detection]] | None = None
    if any(c.roi_source == "detector" for c in configs):
        if detector_file is None:
            raise ValidationError("roi_source=detector requires a detector output file")
        detections = read_detections(detector_file)

    rows: list[AblationRow] = []
    for config in configs:
        pipeline = DescriptorPipeline(
            provider_factory(config.fusion), config.fusion, hist_source=hist_source  # type: ignore[arg-type]
        )
        cache = _FixtureDescriptorCache(
            dataset,
            pipeline,
            config.roi_source,
            detections if config.roi_source == "detector" else None,
        )
        curve = cmc(split.probes, split.gallery, max_rank, cache.descriptor)
        rows.append(
            AblationRow(
                label=config.label,
                fusion=config.fusion,
                roi_source=config.roi_source,
                rank1=curve.rank(1),
                rank10=curve.rank(min(max_rank, 10)),
                probe_count=curve.probe_count,
            )
        )
    return rows
