"""Evaluation file formats: annotations, detector output, manifest, reports.

Text formats are line-based and space-separated:

    annotations:  image_id class cx cy w h
    detections:   image_id class confidence cx cy w h

The dataset manifest is JSON (vehicles -> images -> kind/path/regions plus
probe lists); report CSVs are written with sorted, fixed-format fields so
identical inputs always produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..errors import ValidationError
from ..model import DamageClass, DamageRegion, NormalizedBBox, RegionSource
from .detection import Detection, PrCurve, PrPoint


@dataclass(frozen=True)
class DatasetImage:
    image_id: str
    vehicle_id: str
    kind: str  # "full_body" | "close_up"
    path: str
    case: int
    regions: tuple[DamageRegion, ...] = ()


@dataclass(frozen=True)
class DatasetIndex:
    """Flattened view of a dataset manifest for split/CMC protocols."""

    root: Path
    images: tuple[DatasetImage, ...]

    def images_by_vehicle(self, kind: str | None = None) -> dict[str, list[DatasetImage]]:
        grouped: dict[str, list[DatasetImage]] = {}
        for image in self.images:
            if kind is not None and image.kind != kind:
                continue
            grouped.setdefault(image.vehicle_id, []).append(image)
        return grouped

    def by_id(self) -> dict[str, DatasetImage]:
        return {img.image_id: img for img in self.images}

    def body_for_case(self, vehicle_id: str, case: int) -> DatasetImage:
        for image in self.images:
            if image.vehicle_id == vehicle_id and image.case == case and image.kind == "full_body":
                return image
        raise ValidationError(f"no full_body image for vehicle {vehicle_id} case {case}")

    def image_path(self, image: DatasetImage) -> Path:
        return self.root / image.path


def _parse_bbox(fields: Sequence[str], line_no: int, path: Path) -> NormalizedBBox:
    try:
        cx, cy, w, h = (float(v) for v in fields)
    except ValueError as exc:
        raise ValidationError(f"{path}:{line_no}: bad box coordinates {fields}") from exc
    bbox = NormalizedBBox(cx=cx, cy=cy, w=w, h=h)
    bbox.validate()
    return bbox


def read_annotations(path: str | Path) -> dict[str, list[DamageRegion]]:
    """Ground-truth regions grouped by image id."""
    path = Path(path)
    grouped: dict[str, list[DamageRegion]] = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ValidationError(f"{path}:{line_no}: expected 6 fields, got {len(fields)}")
        region = DamageRegion(
            bbox=_parse_bbox(fields[2:], line_no, path),
            damage_class=DamageClass(fields[1]),
            source=RegionSource.ANNOTATION,
        )
        grouped.setdefault(fields[0], []).append(region)
    return grouped


def read_detections(path: str | Path) -> dict[str, list[Detection]]:
    """Detector output boxes grouped by image id."""
    path = Path(path)
    grouped: dict[str, list[Detection]] = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 7:
            raise ValidationError(f"{path}:{line_no}: expected 7 fields, got {len(fields)}")
        detection = Detection(
            image_id=fields[0],
            damage_class=DamageClass(fields[1]),
            confidence=float(fields[2]),
            bbox=_parse_bbox(fields[3:], line_no, path),
        )
        grouped.setdefault(fields[0], []).append(detection)
    return grouped


def write_detections(path: str | Path, grouped: Mapping[str, Sequence[Detection]]) -> None:
    lines = []
    for image_id in sorted(grouped):
        for det in grouped[image_id]:
            bbox = det.bbox
            lines.append(
                f"{image_id} {det.damage_class.value} {det.confidence:.6f} "
                f"{bbox.cx:.6f} {bbox.cy:.6f} {bbox.w:.6f} {bbox.h:.6f}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_annotations(path: str | Path, grouped: Mapping[str, Sequence[DamageRegion]]) -> None:
    lines = []
    for image_id in sorted(grouped):
        for region in grouped[image_id]:
            bbox = region.bbox
            lines.append(
                f"{image_id} {region.damage_class.value} "
                f"{bbox.cx:.6f} {bbox.cy:.6f} {bbox.w:.6f} {bbox.h:.6f}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    data = json.loads(path.read_text())
    if "vehicles" not in data:
        raise ValidationError(f"{path}: manifest has no 'vehicles' key")
    return data


def save_manifest(path: str | Path, manifest: Mapping[str, Any]) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def dataset_from_manifest(manifest: Mapping[str, Any], root: str | Path) -> DatasetIndex:
    images: list[DatasetImage] = []
    for vehicle_id in sorted(manifest["vehicles"]):
        for entry in manifest["vehicles"][vehicle_id]["images"]:
            images.append(
                DatasetImage(
                    image_id=entry["image_id"],
                    vehicle_id=vehicle_id,
                    kind=entry["kind"],
                    path=entry["path"],
                    case=int(entry.get("case", 0)),
                    regions=tuple(DamageRegion.from_json(r) for r in entry.get("regions", [])),
                )
            )
    return DatasetIndex(root=Path(root), images=tuple(images))


# ------------------------------------------------------------------ reports


def write_pr_table_csv(path: str | Path, curve: PrCurve) -> None:
    """Full PR table: one row per confidence threshold."""
    lines = ["confidence_threshold,precision,recall,tp,fp,fn"]
    for p in curve.points:
        lines.append(
            f"{p.confidence_threshold:.6f},{p.precision:.6f},{p.recall:.6f},{p.tp},{p.fp},{p.fn}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_pr_curve_csv(path: str | Path, curve: PrCurve) -> None:
    """Two-column plot data: recall,precision."""
    lines = ["recall,precision"]
    for p in curve.points:
        lines.append(f"{p.recall:.6f},{p.precision:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_cmc_csv(path: str | Path, rates: Sequence[float]) -> None:
    """Two-column plot data: rank,match_rate."""
    lines = ["rank,match_rate"]
    for rank, rate in enumerate(rates, start=1):
        lines.append(f"{rank},{rate:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_ablation_csv(path: str | Path, rows: Iterable[Any]) -> None:
    lines = ["label,roi_source,hist_bins,weights,rank1,rank10,probes"]
    for row in rows:
        weights = "|".join(f"{w:g}" for w in row.fusion.block_weights)
        lines.append(
            f"{row.label},{row.roi_source},{row.fusion.hist_bins},{weights},"
            f"{row.rank1:.6f},{row.rank10:.6f},{row.probe_count}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def format_pr_point(point: PrPoint) -> str:
    return (
        f"threshold={point.confidence_threshold:g} precision={point.precision:.4f} "
        f"recall={point.recall:.4f} (tp={point.tp} fp={point.fp} fn={point.fn})"
    )
