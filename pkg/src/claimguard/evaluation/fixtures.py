"""Deterministic synthetic dataset generator for desk-scale runs.

Real claim photos are not available, so this builds a miniature stand-in
with the same structure: per vehicle, body shots (shared paint color drawn
from a small palette, plate-like glyph block) and damage close-ups whose
annotated patch carries a vehicle-specific texture. Body shots vary per
case (lighting gradient, framing, noise) so whole-body appearance collides
across same-color vehicles while the damage texture stays discriminative;
that is what makes local-feature ablations meaningful at this scale.

Fraud probes are perturbed copies of enrolled cases (brightness shift plus
crop jitter); legitimate probes are fresh damage on enrolled vehicles. The
generator ends with a self-check pass that measures both similarity
distributions under the toy pipeline and freezes a calibrated flagging
threshold into the manifest.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from PIL import Image

from ..errors import ValidationError
from ..features import FusionConfig, ToyEmbeddingProvider
from ..imaging import ImageBuffer, encode_png
from ..matcher import cosine_similarity
from ..model import (
    ClaimRecord,
    DamageClass,
    DamageRegion,
    EvidenceKind,
    ImageEvidence,
    NormalizedBBox,
)
from ..pipeline import CasePair, DescriptorPipeline
from .detection import Detection, iou
from .io import DatasetIndex, dataset_from_manifest, save_manifest, write_detections

BODY_SIZE = (96, 64)  # (width, height)
CLOSE_SIZE = (64, 64)

# Channel values sit mid-bin for 8-bin histograms: every rendered value v
# keeps floor(v * 8 / 256) stable under the fixture's lighting scale plus a
# +10 brightness shift, so duplicate probes do not shed histogram mass
# across bin edges.
_PALETTE = (
    (204, 44, 44),
    (44, 172, 48),
    (48, 76, 204),
    (204, 204, 44),
    (172, 76, 204),
    (48, 172, 204),
    (204, 140, 44),
    (140, 140, 140),
)

_DAMAGE_CLASSES = (DamageClass.SCRATCH, DamageClass.DENT, DamageClass.CRACK)


@dataclass(frozen=True)
class PerturbationSpec:
    brightness_delta: float = 10.0
    crop_jitter_frac: float = 0.02


@dataclass(frozen=True)
class FixtureSpec:
    vehicles: int = 50
    images_per_vehicle: int = 2  # cases per vehicle; one body + one close-up each
    duplicate_pairs: int | None = None  # default: one per vehicle
    perturbation: PerturbationSpec = PerturbationSpec()
    seed: int = 7

    def __post_init__(self) -> None:
        if self.vehicles < 2:
            raise ValidationError("fixture needs at least 2 vehicles")
        if self.images_per_vehicle < 2:
            raise ValidationError("fixture needs at least 2 cases per vehicle")


@dataclass(frozen=True)
class _DamageSpec:
    cx: float
    cy: float
    w: float
    h: float
    pattern: np.ndarray  # luminance multipliers, small grid
    damage_class: DamageClass


def _pattern_cos(a: np.ndarray, b: np.ndarray) -> float:
    fa, fb = a.reshape(-1), b.reshape(-1)
    return float(np.dot(fa, fb) / (np.linalg.norm(fa) * np.linalg.norm(fb)))


def _fresh_damage(
    rng: np.random.Generator, avoid: list[np.ndarray] | None = None
) -> _DamageSpec:
    # Sparse binary-ish textures decorrelate the pooled local blocks of
    # different vehicles far better than dense random fields. Rejection
    # sampling against `avoid` keeps distinct damage instances visually
    # distinct, which is what makes the local block discriminative.
    # Texture cells stay coarse relative to the embedder's pooling grid so
    # detector-grade box misalignment costs little similarity.
    for _ in range(400):
        on = rng.uniform(0.0, 1.0, size=(5, 5)) < 0.33
        bright = rng.uniform(0.55, 1.0, size=(5, 5))
        dark = rng.uniform(0.03, 0.10, size=(5, 5))
        pattern = np.where(on, bright, dark)
        if not avoid or max(_pattern_cos(pattern, other) for other in avoid) < 0.55:
            break
    else:
        raise ValidationError("could not draw a sufficiently distinct damage pattern")
    return _DamageSpec(
        cx=float(rng.uniform(0.38, 0.62)),
        cy=float(rng.uniform(0.38, 0.62)),
        w=float(rng.uniform(0.42, 0.55)),
        h=float(rng.uniform(0.42, 0.55)),
        pattern=pattern,
        damage_class=_DAMAGE_CLASSES[int(rng.integers(0, len(_DAMAGE_CLASSES)))],
    )


def _lighting(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Per-case multiplicative lighting plane; varies pooled directions."""
    gx = rng.uniform(-0.25, 0.25)
    gy = rng.uniform(-0.25, 0.25)
    xs = (np.arange(width) / width - 0.5) * gx
    ys = (np.arange(height) / height - 0.5) * gy
    return 1.0 + ys[:, None] + xs[None, :]


def _finish(canvas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Exposure scale stays tight (it is cosine-invariant anyway); the
    # gradient plane is what varies pooled directions between cases.
    plane = _lighting(rng, canvas.shape[1], canvas.shape[0])
    lit = canvas * plane[:, :, None] * rng.uniform(0.96, 1.04)
    noisy = lit + rng.normal(0.0, 3.0, size=canvas.shape)
    return np.clip(noisy, 0, 255).astype(np.uint8)


def _render_body(vehicle_idx: int, rng: np.random.Generator) -> ImageBuffer:
    width, height = BODY_SIZE
    base = np.array(_PALETTE[vehicle_idx % len(_PALETTE)], dtype=np.float64)
    canvas = np.full((height, width, 3), 236.0)
    # framing varies per case so same-vehicle shots differ like real photos
    dx = int(rng.integers(-5, 6))
    body_top, body_bottom = 16, 52
    body_left, body_right = 6 + dx, 90 + dx
    canvas[body_top:body_bottom, max(body_left, 0) : min(body_right, width)] = base
    win_left, win_right = max(20 + dx, 0), min(76 + dx, width)
    canvas[20:30, win_left:win_right] = 76.0  # glass shade, mid-bin for 8-bin hists
    plate_left, plate_right = max(38 + dx, 0), min(58 + dx, width)
    canvas[44:50, plate_left:plate_right] = 242.0
    for bit in range(10):
        if (vehicle_idx >> bit) & 1:
            col = plate_left + 2 * bit
            if col + 1 < plate_right:
                canvas[45:49, col : col + 1] = 40.0
    return ImageBuffer(pixels=_finish(canvas, rng))


def _render_close_up(
    vehicle_idx: int,
    damage: _DamageSpec,
    rng: np.random.Generator,
) -> tuple[ImageBuffer, NormalizedBBox]:
    width, height = CLOSE_SIZE
    base = np.array(_PALETTE[vehicle_idx % len(_PALETTE)], dtype=np.float64)
    canvas = np.tile(base, (height, width, 1))
    # small positional jitter per case; the annotation follows the patch
    cx = float(np.clip(damage.cx + rng.uniform(-0.02, 0.02), damage.w / 2, 1 - damage.w / 2))
    cy = float(np.clip(damage.cy + rng.uniform(-0.02, 0.02), damage.h / 2, 1 - damage.h / 2))
    bbox = NormalizedBBox(cx=cx, cy=cy, w=damage.w, h=damage.h)
    x0, y0, x1, y1 = bbox.to_pixel_corners(width, height)
    rows, cols = np.mgrid[y0:y1, x0:x1]
    grid = damage.pattern.shape[0]
    pattern_rows = ((rows - y0) * grid) // max(y1 - y0, 1)
    pattern_cols = ((cols - x0) * grid) // max(x1 - x0, 1)
    multiplier = damage.pattern[pattern_rows, pattern_cols]
    canvas[y0:y1, x0:x1] = base * multiplier[:, :, None]
    return ImageBuffer(pixels=_finish(canvas, rng)), bbox


def _perturb(
    image: ImageBuffer,
    perturbation: PerturbationSpec,
    rng: np.random.Generator,
    bbox: NormalizedBBox | None = None,
) -> tuple[ImageBuffer, NormalizedBBox | None]:
    """Fraud re-submission: brightness shift plus crop jitter and re-resize.

    Any annotation box is mapped through the crop so it still marks the
    damage in the resubmitted photo, exactly as a detector or adjuster
    would box the new image.
    """
    pixels = image.pixels.astype(np.float64) + perturbation.brightness_delta
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    frac = perturbation.crop_jitter_frac
    if frac <= 0:
        return ImageBuffer(pixels=pixels), bbox
    height, width = pixels.shape[:2]
    crop_w = max(int(round(width * (1 - frac))), 1)
    crop_h = max(int(round(height * (1 - frac))), 1)
    x0 = int(rng.integers(0, width - crop_w + 1))
    y0 = int(rng.integers(0, height - crop_h + 1))
    window = Image.fromarray(pixels[y0 : y0 + crop_h, x0 : x0 + crop_w])
    resized = window.resize((width, height), Image.BILINEAR)
    mapped = None
    if bbox is not None:
        new_w = min(bbox.w * width / crop_w, 1.0)
        new_h = min(bbox.h * height / crop_h, 1.0)
        new_cx = float(np.clip((bbox.cx * width - x0) / crop_w, new_w / 2, 1 - new_w / 2))
        new_cy = float(np.clip((bbox.cy * height - y0) / crop_h, new_h / 2, 1 - new_h / 2))
        mapped = NormalizedBBox(cx=new_cx, cy=new_cy, w=new_w, h=new_h)
    return ImageBuffer(pixels=np.asarray(resized, dtype=np.uint8)), mapped


def _region_json(bbox: NormalizedBBox, damage_class: DamageClass) -> dict[str, Any]:
    return DamageRegion(bbox=bbox, damage_class=damage_class).to_json()


def generate_fixture(spec: FixtureSpec, out_dir: str | Path) -> dict[str, Any]:
    """Write images plus manifest.json under out_dir; returns the manifest."""
    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    duplicate_count = spec.duplicate_pairs if spec.duplicate_pairs is not None else spec.vehicles

    manifest: dict[str, Any] = {
        "seed": spec.seed,
        "generator": {
            "vehicles": spec.vehicles,
            "images_per_vehicle": spec.images_per_vehicle,
            "duplicate_pairs": duplicate_count,
            "perturbation": {
                "brightness_delta": spec.perturbation.brightness_delta,
                "crop_jitter_frac": spec.perturbation.crop_jitter_frac,
            },
        },
        "vehicles": {},
        "duplicate_pairs": [],
        "legit_probes": [],
    }

    def save_image(name: str, image: ImageBuffer) -> str:
        (images_dir / name).write_bytes(encode_png(image))
        return f"images/{name}"

    damage_specs: dict[str, _DamageSpec] = {}
    case_images: dict[tuple[str, int], tuple[ImageBuffer, ImageBuffer, NormalizedBBox]] = {}
    patterns_by_color: dict[int, list[np.ndarray]] = {}

    for idx in range(spec.vehicles):
        vehicle_id = f"v{idx:03d}"
        vehicle_rng = np.random.default_rng([spec.seed, idx])
        color = idx % len(_PALETTE)
        damage = _fresh_damage(vehicle_rng, avoid=patterns_by_color.get(color))
        patterns_by_color.setdefault(color, []).append(damage.pattern)
        damage_specs[vehicle_id] = damage
        entries = []
        for case in range(spec.images_per_vehicle):
            case_rng = np.random.default_rng([spec.seed, idx, case])
            body = _render_body(idx, case_rng)
            close_up, bbox = _render_close_up(idx, damage, case_rng)
            case_images[(vehicle_id, case)] = (body, close_up, bbox)
            body_id = f"{vehicle_id}-case{case}-body"
            close_id = f"{vehicle_id}-case{case}-close"
            entries.append(
                {
                    "image_id": body_id,
                    "kind": "full_body",
                    "path": save_image(f"{body_id}.png", body),
                    "case": case,
                    "regions": [],
                }
            )
            entries.append(
                {
                    "image_id": close_id,
                    "kind": "close_up",
                    "path": save_image(f"{close_id}.png", close_up),
                    "case": case,
                    "regions": [_region_json(bbox, damage.damage_class)],
                }
            )
        manifest["vehicles"][vehicle_id] = {"images": entries}

    # fraud probes: perturbed copies of enrolled cases, round-robin by vehicle
    for dup_idx in range(duplicate_count):
        vehicle_idx = dup_idx % spec.vehicles
        vehicle_id = f"v{vehicle_idx:03d}"
        dup_rng = np.random.default_rng([spec.seed, vehicle_idx, 1000 + dup_idx])
        case = int(dup_rng.integers(0, spec.images_per_vehicle))
        body, close_up, bbox = case_images[(vehicle_id, case)]
        dup_body, _ = _perturb(body, spec.perturbation, dup_rng)
        dup_close, dup_bbox = _perturb(close_up, spec.perturbation, dup_rng, bbox)
        body_id = f"{vehicle_id}-dup{dup_idx}-body"
        close_id = f"{vehicle_id}-dup{dup_idx}-close"
        manifest["duplicate_pairs"].append(
            {
                "vehicle_id": vehicle_id,
                "case": case,
                "original_close_up": f"{vehicle_id}-case{case}-close",
                "body": {"image_id": body_id, "path": save_image(f"{body_id}.png", dup_body)},
                "close_up": {
                    "image_id": close_id,
                    "path": save_image(f"{close_id}.png", dup_close),
                    "regions": [
                        _region_json(dup_bbox or bbox, damage_specs[vehicle_id].damage_class)
                    ],
                },
            }
        )

    # legitimate probes: fresh, visibly different damage on enrolled vehicles
    for idx in range(spec.vehicles):
        vehicle_id = f"v{idx:03d}"
        legit_rng = np.random.default_rng([spec.seed, idx, 2000])
        fresh = _fresh_damage(legit_rng, avoid=patterns_by_color.get(idx % len(_PALETTE)))
        body = _render_body(idx, legit_rng)
        close_up, bbox = _render_close_up(idx, fresh, legit_rng)
        body_id = f"{vehicle_id}-legit-body"
        close_id = f"{vehicle_id}-legit-close"
        manifest["legit_probes"].append(
            {
                "vehicle_id": vehicle_id,
                "body": {"image_id": body_id, "path": save_image(f"{body_id}.png", body)},
                "close_up": {
                    "image_id": close_id,
                    "path": save_image(f"{close_id}.png", close_up),
                    "regions": [_region_json(bbox, fresh.damage_class)],
                },
            }
        )

    manifest["calibration"] = _self_check(manifest, out)
    save_manifest(out / "manifest.json", manifest)
    return manifest


def _probe_descriptor(
    pipeline: DescriptorPipeline, root: Path, entry: dict[str, Any]
) -> np.ndarray:
    from ..imaging import decode_image

    body = decode_image((root / entry["body"]["path"]).read_bytes())
    close_up = decode_image((root / entry["close_up"]["path"]).read_bytes())
    region = DamageRegion.from_json(entry["close_up"]["regions"][0])
    case = CasePair(
        body_id=entry["body"]["image_id"],
        body=body,
        close_up_id=entry["close_up"]["image_id"],
        close_up=close_up,
    )
    return pipeline.descriptor_for_region(case, region.bbox).values


def _self_check(manifest: dict[str, Any], root: Path) -> dict[str, Any]:
    """Measure duplicate vs non-duplicate similarity and calibrate the flag
    threshold; fails loudly if the fixture cannot separate the two."""
    from ..imaging import decode_image

    config = FusionConfig(local_dim=64, global_dim=64, hist_bins=8)
    pipeline = DescriptorPipeline(ToyEmbeddingProvider(64, 64), config)
    dataset = dataset_from_manifest(manifest, root)
    by_id = dataset.by_id()

    enrolled: dict[str, np.ndarray] = {}
    enrolled_vehicle: dict[str, str] = {}
    for image in dataset.images:
        if image.kind != "close_up":
            continue
        body = dataset.body_for_case(image.vehicle_id, image.case)
        case = CasePair(
            body_id=body.image_id,
            body=decode_image(dataset.image_path(body).read_bytes()),
            close_up_id=image.image_id,
            close_up=decode_image(dataset.image_path(image).read_bytes()),
        )
        enrolled[image.image_id] = pipeline.descriptor_for_region(
            case, image.regions[0].bbox
        ).values
        enrolled_vehicle[image.image_id] = image.vehicle_id

    ids = sorted(enrolled)
    nonpair_sims = [
        cosine_similarity(enrolled[a], enrolled[b])
        for i, a in enumerate(ids)
        for b in ids[i + 1 :]
        if enrolled_vehicle[a] != enrolled_vehicle[b]
    ]

    duplicate_best: list[float] = []
    duplicate_self: list[float] = []
    for pair in manifest["duplicate_pairs"]:
        probe = _probe_descriptor(pipeline, root, pair)
        sims = {image_id: cosine_similarity(probe, vec) for image_id, vec in enrolled.items()}
        duplicate_best.append(max(sims.values()))
        duplicate_self.append(sims[pair["original_close_up"]])

    legit_best = [
        max(
            cosine_similarity(_probe_descriptor(pipeline, root, probe), vec)
            for vec in enrolled.values()
        )
        for probe in manifest["legit_probes"]
    ]

    dup_min = min(duplicate_best)
    legit_max = max(legit_best) if legit_best else -1.0
    if dup_min <= legit_max:
        raise ValidationError(
            "fixture self-check failed: duplicate similarities "
            f"(min {dup_min:.4f}) do not separate from legitimate re-claims "
            f"(max {legit_max:.4f}); adjust perturbation or seed"
        )
    nonpair = np.array(nonpair_sims)
    return {
        "threshold": round((dup_min + legit_max) / 2.0, 6),
        "duplicate_best_min": round(dup_min, 6),
        "duplicate_self_min": round(min(duplicate_self), 6),
        "legit_best_max": round(legit_max, 6),
        "nonpair_p95": round(float(np.percentile(nonpair, 95)), 6),
        "nonpair_max": round(float(nonpair.max()), 6),
        "fusion": {"local_dim": 64, "global_dim": 64, "hist_bins": 8},
    }


def simulate_detector(
    dataset: DatasetIndex,
    out_path: str | Path,
    seed: int,
    min_iou: float = 0.7,
) -> None:
    """Write detector-format boxes: annotations jittered to IoU >= min_iou."""
    rng = np.random.default_rng(seed)
    grouped: dict[str, list[Detection]] = {}
    for image in dataset.images:
        if image.kind != "close_up" or not image.regions:
            continue
        region = image.regions[0]
        bbox = region.bbox
        while True:
            jittered = NormalizedBBox(
                cx=float(np.clip(bbox.cx + rng.uniform(-0.05, 0.05) * bbox.w, 0, 1)),
                cy=float(np.clip(bbox.cy + rng.uniform(-0.05, 0.05) * bbox.h, 0, 1)),
                w=float(np.clip(bbox.w * rng.uniform(0.95, 1.07), 0.01, 1)),
                h=float(np.clip(bbox.h * rng.uniform(0.95, 1.07), 0.01, 1)),
            )
            if iou(bbox, jittered) >= min_iou:
                break
        grouped[image.image_id] = [
            Detection(
                image_id=image.image_id,
                bbox=jittered,
                damage_class=region.damage_class,
                confidence=float(rng.uniform(0.5, 0.99)),
            )
        ]
    write_detections(out_path, grouped)


# ------------------------------------------------------- claim construction


def fixture_claims(
    manifest: dict[str, Any], dataset: DatasetIndex
) -> Iterator[tuple[ClaimRecord, dict[str, "ImageBuffer"]]]:
    """One pending claim per vehicle, evidence ordered body/close per case."""
    from ..imaging import decode_image

    base_ts = 1_700_000_000_000
    for index, vehicle_id in enumerate(sorted(manifest["vehicles"])):
        entries = manifest["vehicles"][vehicle_id]["images"]
        by_case: dict[int, list[dict[str, Any]]] = {}
        for entry in entries:
            by_case.setdefault(int(entry["case"]), []).append(entry)
        evidence: list[ImageEvidence] = []
        images: dict[str, ImageBuffer] = {}
        for case in sorted(by_case):
            ordered = sorted(by_case[case], key=lambda e: e["kind"] != "full_body")
            for entry in ordered:
                evidence.append(
                    ImageEvidence(
                        image_id=entry["image_id"],
                        kind=EvidenceKind(entry["kind"]),
                        content_ref=entry["path"],
                        regions=tuple(DamageRegion.from_json(r) for r in entry["regions"]),
                    )
                )
                images[entry["image_id"]] = decode_image(
                    (dataset.root / entry["path"]).read_bytes()
                )
        yield (
            ClaimRecord(
                claim_id=f"claim-{vehicle_id}",
                vehicle_id=vehicle_id,
                submitted_at=base_ts + index * 1000,
                evidence=tuple(evidence),
            ),
            images,
        )


def probe_claim(
    entry: dict[str, Any],
    dataset: DatasetIndex,
    claim_id: str,
    submitted_at: int = 1_800_000_000_000,
) -> tuple[ClaimRecord, dict[str, "ImageBuffer"]]:
    """Submission-ready claim for a duplicate-pair or legit-probe entry."""
    from ..imaging import decode_image

    body = entry["body"]
    close_up = entry["close_up"]
    record = ClaimRecord(
        claim_id=claim_id,
        vehicle_id=entry["vehicle_id"],
        submitted_at=submitted_at,
        evidence=(
            ImageEvidence(
                image_id=body["image_id"],
                kind=EvidenceKind.FULL_BODY,
                content_ref=body["path"],
            ),
            ImageEvidence(
                image_id=close_up["image_id"],
                kind=EvidenceKind.CLOSE_UP,
                content_ref=close_up["path"],
                regions=tuple(DamageRegion.from_json(r) for r in close_up["regions"]),
            ),
        ),
    )
    images = {
        body["image_id"]: decode_image((dataset.root / body["path"]).read_bytes()),
        close_up["image_id"]: decode_image((dataset.root / close_up["path"]).read_bytes()),
    }
    return record, images
