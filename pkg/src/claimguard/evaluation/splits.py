"""Dataset split protocols and probe/gallery construction.

Two protocols: subject_disjoint keeps every vehicle entirely on one side
(train/test separated by car identity); subject_overlapped splits each
vehicle's images across both sides, mimicking a deployed system whose
history is folded back into training. Images never appear on both sides in
either mode. Splits are deterministic in (dataset, mode, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ValidationError
from .io import DatasetImage, DatasetIndex


class SplitMode(str, Enum):
    SUBJECT_OVERLAPPED = "subject_overlapped"
    SUBJECT_DISJOINT = "subject_disjoint"


@dataclass(frozen=True)
class SplitSpec:
    mode: SplitMode
    seed: int
    train_ids: frozenset[str]
    test_ids: frozenset[str]


@dataclass(frozen=True)
class ProbeGallery:
    probes: tuple[DatasetImage, ...]
    gallery: tuple[DatasetImage, ...]


def _train_count(total: int, ratio: float) -> int:
    """Round-to-nearest split size, clamped so both sides stay non-empty."""
    return min(max(round(total * ratio), 1), total - 1)


def make_split(
    dataset: DatasetIndex,
    mode: SplitMode,
    seed: int,
    train_ratio: float = 0.7,
) -> SplitSpec:
    """Partition image ids into train/test under the chosen protocol."""
    rng = np.random.default_rng(seed)
    by_vehicle = dataset.images_by_vehicle()
    vehicles = sorted(by_vehicle)

    train: set[str] = set()
    test: set[str] = set()
    if mode is SplitMode.SUBJECT_DISJOINT:
        if len(vehicles) < 2:
            raise ValidationError(
                f"subject_disjoint split needs at least 2 vehicles, got {len(vehicles)}"
            )
        shuffled = list(vehicles)
        rng.shuffle(shuffled)
        cut = _train_count(len(shuffled), train_ratio)
        train_vehicles = set(shuffled[:cut])
        for vehicle in vehicles:
            side = train if vehicle in train_vehicles else test
            side.update(img.image_id for img in by_vehicle[vehicle])
    else:
        for vehicle in vehicles:
            images = [img.image_id for img in by_vehicle[vehicle]]
            if len(images) < 2:
                # A single image cannot sit on both sides; it goes to train.
                train.update(images)
                continue
            shuffled = list(images)
            rng.shuffle(shuffled)
            cut = _train_count(len(shuffled), train_ratio)
            train.update(shuffled[:cut])
            test.update(shuffled[cut:])
    return SplitSpec(
        mode=mode, seed=seed, train_ids=frozenset(train), test_ids=frozenset(test)
    )


def make_probe_gallery(dataset: DatasetIndex, seed: int) -> ProbeGallery:
    """Pick one close-up per vehicle as probe; the rest form the gallery."""
    rng = np.random.default_rng(seed)
    by_vehicle = dataset.images_by_vehicle(kind="close_up")
    offenders = sorted(v for v, images in by_vehicle.items() if len(images) < 2)
    if offenders:
        raise ValidationError(
            f"vehicles with fewer than 2 close-up images: {', '.join(offenders)}"
        )
    probes: list[DatasetImage] = []
    gallery: list[DatasetImage] = []
    for vehicle in sorted(by_vehicle):
        images = sorted(by_vehicle[vehicle], key=lambda img: img.image_id)
        pick = int(rng.integers(0, len(images)))
        probes.append(images[pick])
        gallery.extend(img for i, img in enumerate(images) if i != pick)
    return ProbeGallery(probes=tuple(probes), gallery=tuple(gallery))
