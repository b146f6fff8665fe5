"""8-bit grayscale image container, PNG round-trip, montage tiling.

The determinism contract everywhere in this package is pixel content,
not PNG container bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 8-bit single-channel raster."""

    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 2 or px.dtype != np.uint8:
            raise ValueError("pixels must be a 2-D uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"empty image shape {px.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def mean_l1_distance(self, other: "GrayImage") -> float:
        """Mean per-pixel absolute intensity difference."""
        if self.pixels.shape != other.pixels.shape:
            raise ValueError("images differ in shape")
        a = self.pixels.astype(np.float64)
        b = other.pixels.astype(np.float64)
        return float(np.mean(np.abs(a - b)))

    def foreground_iou(self, other: "GrayImage", threshold: int = 128) -> float:
        """Intersection-over-union of the >=threshold pixel sets."""
        fa = self.pixels >= threshold
        fb = other.pixels >= threshold
        union = np.count_nonzero(fa | fb)
        if union == 0:
            return 1.0
        return float(np.count_nonzero(fa & fb) / union)


@dataclass(frozen=True)
class RenderedClass:
    """One labeled family member: class index, image, the perturbation
    actually rendered, and how many resamples that took."""

    index: int
    image: GrayImage
    eps: tuple[float, ...]
    resamples: int = 0


def write_png(image: GrayImage, path: str | Path) -> None:
    PILImage.fromarray(image.pixels, mode="L").save(str(path), format="PNG")


def read_png(path: str | Path) -> GrayImage:
    with PILImage.open(str(path)) as img:
        if img.mode != "L":
            img = img.convert("L")
        return GrayImage(np.asarray(img, dtype=np.uint8).copy())


def read_rgb(path: str | Path) -> np.ndarray:
    """Load an RGB (PNG/PPM/...) image as an (H, W, 3) uint8 array."""
    with PILImage.open(str(path)) as img:
        if img.mode != "RGB":
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8).copy()


def montage(images: list[GrayImage], k: int | None = None) -> GrayImage:
    """Tile the first k images row-major into one image.

    Grid is ceil(sqrt(k)) columns; trailing cells stay black. All tiles
    must share one size.
    """
    if k is None:
        k = len(images)
    if k < 1 or len(images) == 0:
        raise ValueError("montage needs at least one image")
    tiles = images[:k]
    h, w = tiles[0].pixels.shape
    for t in tiles:
        if t.pixels.shape != (h, w):
            raise ValueError("montage tiles must share one size")
    cols = int(np.ceil(np.sqrt(len(tiles))))
    rows = int(np.ceil(len(tiles) / cols))
    canvas = np.zeros((rows * h, cols * w), dtype=np.uint8)
    for i, t in enumerate(tiles):
        r, c = divmod(i, cols)
        canvas[r * h : (r + 1) * h, c * w : (c + 1) * w] = t.pixels
    return GrayImage(canvas)
