"""Embedding providers and block-structured descriptor fusion.

A fused descriptor concatenates three blocks: the local damage embedding,
the global body embedding, and the color histogram. Each block is
L2-normalized before being scaled by its weight, which makes cosine over
the fused vectors a convex combination of per-block cosines:

    cos(fuse(a), fuse(b)) = sum_b (w_b^2 / sum w^2) * cos(a_b, b_b)

for nonzero blocks. Without the normalization a 4096-dim deep block would
numerically drown a 24-dim histogram.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Protocol

import numpy as np

from .errors import ConfigError, DimensionMismatchError, MissingEmbeddingError, ValidationError
from .imaging import HistogramFeature, ImageBuffer, color_histogram, toy_embed

EMBED_SIDECAR_MAGIC = b"CGE1"

EmbeddingKind = Literal["local_roi", "global_body"]


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; the zero vector passes through unchanged."""
    vec = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise ValidationError("vector contains non-finite values")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return vec.copy()
    return vec / norm


@dataclass(frozen=True)
class FusionConfig:
    """Block layout and weights for descriptor fusion.

    hist_bins=0 removes the histogram block from the layout entirely.
    Ablations that merely drop a block set its weight to 0 instead, so
    stored galleries stay dimension-compatible within one experiment.
    """

    local_dim: int = 64
    global_dim: int = 64
    hist_bins: int = 8
    block_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if self.local_dim < 1 or self.global_dim < 1:
            raise ConfigError("embedding dims must be positive")
        if self.hist_bins < 0:
            raise ConfigError("hist_bins must be >= 0")
        weights = self.block_weights
        if len(weights) != 3:
            raise ConfigError("block_weights must have exactly three entries")
        if not all(np.isfinite(w) and w >= 0 for w in weights):
            raise ConfigError(f"block weights must be finite and nonnegative: {weights}")
        if not any(w > 0 for w in weights):
            raise ConfigError("at least one block weight must be positive")

    @property
    def hist_dim(self) -> int:
        return 3 * self.hist_bins

    @property
    def total_dim(self) -> int:
        return self.local_dim + self.global_dim + self.hist_dim

    @property
    def block_dims(self) -> tuple[int, int, int]:
        return (self.local_dim, self.global_dim, self.hist_dim)

    def with_weights(self, weights: tuple[float, float, float]) -> "FusionConfig":
        return FusionConfig(
            local_dim=self.local_dim,
            global_dim=self.global_dim,
            hist_bins=self.hist_bins,
            block_weights=weights,
        )

    def same_layout(self, other: "FusionConfig") -> bool:
        """Dimension compatibility; weights may differ between runs."""
        return self.block_dims == other.block_dims


@dataclass(frozen=True, eq=False)
class FusedDescriptor:
    """Concatenation [w_l * L, w_g * G, w_h * H] of normalized blocks."""

    layout: FusionConfig
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != self.layout.total_dim:
            raise DimensionMismatchError(
                f"descriptor has {len(self.values)} values, layout expects {self.layout.total_dim}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FusedDescriptor):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.values, other.values)


def fuse_blocks(blocks: list[np.ndarray], weights: list[float]) -> np.ndarray:
    """L2-normalize each block, scale by its weight, concatenate in order."""
    if len(blocks) != len(weights):
        raise DimensionMismatchError(f"{len(blocks)} blocks but {len(weights)} weights")
    parts = [l2_normalize(block) * weight for block, weight in zip(blocks, weights)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.float64)


def fuse(
    local: np.ndarray,
    global_: np.ndarray,
    hist: HistogramFeature | None,
    config: FusionConfig,
) -> FusedDescriptor:
    """Build the fused descriptor for one close-up ROI + body shot pair."""
    if len(local) != config.local_dim:
        raise DimensionMismatchError(
            f"local block has dim {len(local)}, config expects {config.local_dim}"
        )
    if len(global_) != config.global_dim:
        raise DimensionMismatchError(
            f"global block has dim {len(global_)}, config expects {config.global_dim}"
        )
    if config.hist_bins > 0:
        if hist is None:
            raise DimensionMismatchError("config enables the histogram block but none was given")
        if hist.bins_per_channel != config.hist_bins:
            raise DimensionMismatchError(
                f"histogram has {hist.bins_per_channel} bins, config expects {config.hist_bins}"
            )
        hist_block = np.asarray(hist.values, dtype=np.float64)
    else:
        if hist is not None:
            raise DimensionMismatchError("config disables the histogram block but one was given")
        hist_block = np.zeros(0, dtype=np.float64)
    w_local, w_global, w_hist = config.block_weights
    blocks = [np.asarray(local, dtype=np.float64), np.asarray(global_, dtype=np.float64)]
    weights = [w_local, w_global]
    if config.hist_bins > 0:
        blocks.append(hist_block)
        weights.append(w_hist)
    return FusedDescriptor(layout=config, values=fuse_blocks(blocks, weights))


class EmbeddingProvider(Protocol):
    """Deterministic image -> vector contract with fixed dims per kind."""

    def dim(self, kind: EmbeddingKind) -> int: ...

    def embed(self, image_id: str, image: ImageBuffer | None, kind: EmbeddingKind) -> np.ndarray: ...


class ToyEmbeddingProvider:
    """Grid-pooled luminance embedder; needs pixels, ignores image ids."""

    def __init__(self, local_dim: int = 64, global_dim: int = 64) -> None:
        self._dims = {"local_roi": local_dim, "global_body": global_dim}

    def dim(self, kind: EmbeddingKind) -> int:
        return self._dims[kind]

    def embed(self, image_id: str, image: ImageBuffer | None, kind: EmbeddingKind) -> np.ndarray:
        if image is None:
            raise ValidationError(f"toy provider needs pixel data for {image_id}")
        return toy_embed(image, dim=self._dims[kind])


class LookupEmbeddingProvider:
    """Precomputed vectors keyed by image id, loaded from a sidecar file.

    Stands in for a real backbone whose outputs were exported offline
    (e.g. 4096-dim fully-connected activations). The table is immutable
    after load, so concurrent reads are safe.
    """

    def __init__(self, local: "EmbeddingTable", global_: "EmbeddingTable") -> None:
        self._tables = {"local_roi": local, "global_body": global_}

    @staticmethod
    def from_files(local_path: str | Path, global_path: str | Path) -> "LookupEmbeddingProvider":
        return LookupEmbeddingProvider(
            local=read_embedding_sidecar(local_path),
            global_=read_embedding_sidecar(global_path),
        )

    def dim(self, kind: EmbeddingKind) -> int:
        return self._tables[kind].dim

    def embed(self, image_id: str, image: ImageBuffer | None, kind: EmbeddingKind) -> np.ndarray:
        table = self._tables[kind]
        vec = table.vectors.get(image_id)
        if vec is None:
            raise MissingEmbeddingError(f"no {kind} embedding for image {image_id}")
        return vec


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]


def write_embedding_sidecar(path: str | Path, dim: int, vectors: dict[str, np.ndarray]) -> None:
    """Binary sidecar: magic, u32 dim, u32 count, then (u16 id-length, id, dim x f32 LE)."""
    with open(path, "wb") as fh:
        fh.write(EMBED_SIDECAR_MAGIC)
        fh.write(struct.pack("<II", dim, len(vectors)))
        for image_id, vec in vectors.items():
            if len(vec) != dim:
                raise DimensionMismatchError(f"vector for {image_id} has dim {len(vec)}, not {dim}")
            encoded = image_id.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def read_embedding_sidecar(path: str | Path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != EMBED_SIDECAR_MAGIC:
            raise ValidationError(f"bad embedding sidecar magic {magic!r} in {path}")
        dim, count = struct.unpack("<II", fh.read(8))
        vectors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<H", fh.read(2))
            image_id = fh.read(id_len).decode("utf-8")
            raw = fh.read(dim * 4)
            if len(raw) != dim * 4:
                raise ValidationError(f"truncated embedding sidecar {path}")
            vectors[image_id] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return EmbeddingTable(dim=dim, vectors=vectors)


def body_histogram(image: ImageBuffer, config: FusionConfig) -> HistogramFeature | None:
    """Histogram block input for a body shot, or None when disabled."""
    if config.hist_bins == 0:
        return None
    return color_histogram(image, bins_per_channel=config.hist_bins)
