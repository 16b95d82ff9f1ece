"""Evidence-to-descriptor pipeline shared by the service, CLI, and evaluation.

One fused descriptor is produced per damage region of each close-up: the
region crop feeds the local block, the paired body shot feeds the global
block, and the histogram block comes from the body shot by default (the
histogram is treated as a global feature; `hist_source` flips it to the
damage crop for experiments).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .errors import PipelineError, ValidationError
from .features import EmbeddingProvider, FusedDescriptor, FusionConfig, body_histogram, fuse
from .imaging import ImageBuffer, color_histogram, crop_roi, decode_image
from .model import ClaimRecord, EvidenceKind, ImageEvidence
from .store import DescriptorEntry

HistSource = Literal["full_body", "close_up"]


@dataclass(frozen=True)
class CasePair:
    """A body shot and a close-up that document the same damage instance."""

    body_id: str
    body: ImageBuffer
    close_up_id: str
    close_up: ImageBuffer


class DescriptorPipeline:
    def __init__(
        self,
        provider: EmbeddingProvider,
        config: FusionConfig,
        hist_source: HistSource = "full_body",
    ) -> None:
        if provider.dim("local_roi") != config.local_dim:
            raise ValidationError(
                f"provider local dim {provider.dim('local_roi')} != config {config.local_dim}"
            )
        if provider.dim("global_body") != config.global_dim:
            raise ValidationError(
                f"provider global dim {provider.dim('global_body')} != config {config.global_dim}"
            )
        self.provider = provider
        self.config = config
        self.hist_source = hist_source

    def descriptor_for_region(self, case: CasePair, region_bbox) -> FusedDescriptor:
        roi = crop_roi(case.close_up, region_bbox)
        local = self.provider.embed(case.close_up_id, roi, "local_roi")
        global_ = self.provider.embed(case.body_id, case.body, "global_body")
        if self.config.hist_bins == 0:
            hist = None
        elif self.hist_source == "close_up":
            hist = color_histogram(case.close_up, self.config.hist_bins)
        else:
            hist = body_histogram(case.body, self.config)
        return fuse(local, global_, hist, self.config)

    def entries_for_claim(
        self, record: ClaimRecord, images: dict[str, ImageBuffer]
    ) -> list[DescriptorEntry]:
        """One descriptor per (close-up, region), each close-up paired with
        the most recent preceding full-body shot in evidence order."""
        entries: list[DescriptorEntry] = []
        current_body: ImageEvidence | None = None
        bodies = [e for e in record.evidence if e.kind is EvidenceKind.FULL_BODY]
        if not bodies:
            raise ValidationError(f"claim {record.claim_id} has no full_body evidence")
        for evidence in record.evidence:
            if evidence.kind is EvidenceKind.FULL_BODY:
                current_body = evidence
                continue
            body = current_body or bodies[0]
            case = CasePair(
                body_id=body.image_id,
                body=self._image(images, body.image_id),
                close_up_id=evidence.image_id,
                close_up=self._image(images, evidence.image_id),
            )
            for region in evidence.regions:
                entries.append(
                    DescriptorEntry(
                        image_id=evidence.image_id,
                        descriptor=self.descriptor_for_region(case, region.bbox),
                    )
                )
        return entries

    @staticmethod
    def _image(images: dict[str, ImageBuffer], image_id: str) -> ImageBuffer:
        image = images.get(image_id)
        if image is None:
            raise PipelineError("decode", f"no pixel data supplied for image {image_id}")
        return image


def decode_evidence(payloads: dict[str, bytes]) -> dict[str, ImageBuffer]:
    """Decode raw image bytes keyed by image_id, naming failures."""
    decoded: dict[str, ImageBuffer] = {}
    for image_id, data in payloads.items():
        try:
            decoded[image_id] = decode_image(data)
        except Exception as exc:
            raise PipelineError("decode", f"image {image_id}: {exc}") from exc
    return decoded
