"""Image decoding, ROI cropping, color histograms, and the toy embedder.

Everything here is a pure function over in-memory RGB buffers, so the full
enrollment pipeline runs with no neural backbone: the toy embedder
average-pools luminance over a square grid and stands in for a real
deep-feature extractor.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, DecodeError, EmptyRoiError, ValidationError
from .model import NormalizedBBox

# Rec. 601 luma coefficients.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Row-major 8-bit RGB pixels, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValidationError(f"pixel array must be (h, w, 3), got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValidationError(f"pixel dtype must be uint8, got {self.pixels.dtype}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValidationError("image must have at least one pixel")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@dataclass(frozen=True, eq=False)
class HistogramFeature:
    """Channel-major color histogram: R bins, then G, then B.

    Each channel's block is L1-normalized independently so changing the bin
    count never shifts mass between channels.
    """

    bins_per_channel: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != 3 * self.bins_per_channel:
            raise ValidationError(
                f"histogram length {len(self.values)} != 3 x {self.bins_per_channel}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HistogramFeature):
            return NotImplemented
        return self.bins_per_channel == other.bins_per_channel and np.array_equal(
            self.values, other.values
        )


def decode_image(data: bytes) -> ImageBuffer:
    """Decode a PNG or JPEG stream to an RGB buffer.

    Alpha is discarded and grayscale is expanded to 3 channels. A truncated
    or malformed stream raises DecodeError without returning a partial
    buffer.
    """
    try:
        img = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise DecodeError(f"container parse failed: {exc}") from exc
    except OSError as exc:
        raise DecodeError(f"stream read failed: {exc}") from exc
    fmt = img.format or "unknown"
    try:
        img = img.convert("RGB")
        img.load()
    except OSError as exc:
        raise DecodeError(f"{fmt.lower()} pixel decode failed: {exc}") from exc
    return ImageBuffer(pixels=np.asarray(img, dtype=np.uint8))


def encode_png(image: ImageBuffer) -> bytes:
    """Lossless PNG bytes for an RGB buffer (fixture output, test round-trips)."""
    buf = io.BytesIO()
    Image.fromarray(image.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def crop_roi(image: ImageBuffer, bbox: NormalizedBBox) -> ImageBuffer:
    """Extract the pixel block under a normalized box, clipped to the frame.

    Degenerate boxes clamp to a single pixel; a box entirely outside the
    frame raises EmptyRoiError.
    """
    width, height = image.width, image.height
    left, top, right, bottom = bbox.corners()
    if right <= 0.0 or left >= 1.0 or bottom <= 0.0 or top >= 1.0:
        raise EmptyRoiError(
            f"bbox (cx={bbox.cx}, cy={bbox.cy}, w={bbox.w}, h={bbox.h}) lies outside the frame"
        )
    x0, y0, x1, y1 = bbox.to_pixel_corners(width, height)
    return ImageBuffer(pixels=np.ascontiguousarray(image.pixels[y0:y1, x0:x1]))


def color_histogram(image: ImageBuffer, bins_per_channel: int = 8) -> HistogramFeature:
    """Per-channel color histogram with bin index floor(v * B / 256).

    The bin rule is exact for B dividing 256; each channel is L1-normalized
    to sum to 1.
    """
    if bins_per_channel < 1:
        raise ValidationError(f"bins_per_channel must be >= 1, got {bins_per_channel}")
    bins = bins_per_channel
    flat = image.pixels.reshape(-1, 3)
    n = flat.shape[0]
    # floor(v * B / 256) in exact integer arithmetic; always < B for v <= 255.
    indices = (flat.astype(np.int64) * bins) // 256
    values = np.empty(3 * bins, dtype=np.float64)
    for channel in range(3):
        counts = np.bincount(indices[:, channel], minlength=bins)
        values[channel * bins : (channel + 1) * bins] = counts / n
    return HistogramFeature(bins_per_channel=bins, values=values)


def toy_embed(image: ImageBuffer, dim: int = 64) -> np.ndarray:
    """Deterministic stand-in embedding: grid-pooled luminance, L2-normalized.

    Luminance (0.299 R + 0.587 G + 0.114 B) is average-pooled over a
    sqrt(dim) x sqrt(dim) grid and flattened row-major. An all-zero pool
    (black image) maps to the zero vector.
    """
    grid = math.isqrt(dim)
    if grid * grid != dim or dim < 1:
        raise ConfigError(f"toy embedding dim must be a perfect square, got {dim}")
    luma = image.pixels.astype(np.float64) @ _LUMA
    height, width = luma.shape
    pooled = np.zeros((grid, grid), dtype=np.float64)
    row_edges = [(i * height) // grid for i in range(grid + 1)]
    col_edges = [(j * width) // grid for j in range(grid + 1)]
    for i in range(grid):
        for j in range(grid):
            cell = luma[row_edges[i] : row_edges[i + 1], col_edges[j] : col_edges[j + 1]]
            if cell.size:
                pooled[i, j] = cell.mean()
    vec = pooled.reshape(-1)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return vec
    return vec / norm
