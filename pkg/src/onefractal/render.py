"""Chaos-game point generation and rasterization.

The recurrence v_{t+1} = maps[sigma_t](v_t) starts at the origin and
draws map indices i.i.d. from the code's probabilities. Points after
burn-in are scattered onto a pixel grid: the padded bounding box is
letterboxed into the frame (aspect preserved) and each point marks its
pixel, or a 3x3 patch around it, white on black.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chaos import DIVERGENCE_LIMIT, orbit_fill, warmup
from .ifs import IfsCode
from .image import GrayImage

__all__ = [
    "RenderConfig",
    "Diverged",
    "DegenerateExtent",
    "generate_points",
    "rasterize",
    "render",
    "occupancy",
    "warmup",
    "PATCH_SINGLE",
    "PATCH_FIXED3",
    "PATCH_RANDOM3",
    "PATCH_MODES",
]

PATCH_SINGLE = "single-pixel"
PATCH_FIXED3 = "fixed-3x3"
PATCH_RANDOM3 = "random-3x3"
PATCH_MODES = (PATCH_SINGLE, PATCH_FIXED3, PATCH_RANDOM3)


class Diverged(Exception):
    """Chaos-game orbit left the finite range; the system is not usable
    as-is (typically an over-perturbed, expansive map set)."""


class DegenerateExtent(Exception):
    """All points coincide; there is no extent to rasterize."""


@dataclass(frozen=True)
class RenderConfig:
    point_count: int = 100_000
    burn_in: int = 100
    width: int = 256
    height: int = 256
    padding: float = 0.05
    patch_mode: str = PATCH_SINGLE
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.burn_in < 0 or self.point_count <= self.burn_in:
            raise ValueError(
                f"need point_count > burn_in >= 0, got "
                f"{self.point_count}, {self.burn_in}"
            )
        if self.width < 8 or self.height < 8:
            raise ValueError(f"frame too small: {self.width}x{self.height}")
        if not 0.0 <= self.padding < 0.5:
            raise ValueError(f"padding must be in [0, 0.5), got {self.padding}")
        if self.patch_mode not in PATCH_MODES:
            raise ValueError(f"unknown patch mode {self.patch_mode!r}")

    def with_seed(self, rng_seed: int) -> "RenderConfig":
        return replace(self, rng_seed=rng_seed)


def generate_points(code: IfsCode, cfg: RenderConfig) -> np.ndarray:
    """Run the chaos game; return orbit points burn_in..point_count-1.

    Raises Diverged when a coordinate exceeds the divergence limit or
    turns non-finite.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    idx = rng.choice(
        code.n_maps, size=cfg.point_count - 1, p=np.asarray(code.probs)
    ).astype(np.int64)
    out = np.empty((cfg.point_count, 2), dtype=np.float64)
    escaped = orbit_fill(code.coefficient_array(), idx, out, DIVERGENCE_LIMIT)
    if escaped >= 0:
        raise Diverged(f"orbit escaped at step {escaped}")
    return out[cfg.burn_in :]


_PATCH_OFFSETS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)]


def rasterize(points: np.ndarray, cfg: RenderConfig) -> GrayImage:
    """Scatter points into a width x height frame.

    The bounding box, padded by ``cfg.padding`` of its own size on each
    side, is scaled by one factor for both axes (letterboxed) and the
    result centered; a zero-extent axis maps to the frame center.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, 2) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")

    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    bw = xmax - xmin
    bh = ymax - ymin
    if bw == 0.0 and bh == 0.0:
        raise DegenerateExtent("all points coincide")
    xmin -= cfg.padding * bw
    ymin -= cfg.padding * bh
    bw *= 1.0 + 2.0 * cfg.padding
    bh *= 1.0 + 2.0 * cfg.padding

    sx = (cfg.width - 1) / bw if bw > 0.0 else math.inf
    sy = (cfg.height - 1) / bh if bh > 0.0 else math.inf
    s = min(sx, sy)
    x_off = ((cfg.width - 1) - s * bw) / 2.0 if bw > 0.0 else (cfg.width - 1) / 2.0
    y_off = ((cfg.height - 1) - s * bh) / 2.0 if bh > 0.0 else (cfg.height - 1) / 2.0

    # y points up in attractor coordinates, rows grow downward.
    col = np.floor(x_off + (pts[:, 0] - xmin) * (s if bw > 0.0 else 0.0) + 0.5)
    row = (cfg.height - 1) - np.floor(
        y_off + (pts[:, 1] - ymin) * (s if bh > 0.0 else 0.0) + 0.5
    )
    col = np.clip(col, 0, cfg.width - 1).astype(np.intp)
    row = np.clip(row, 0, cfg.height - 1).astype(np.intp)

    canvas = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    if cfg.patch_mode == PATCH_SINGLE:
        offsets = [(0, 0)]
    elif cfg.patch_mode == PATCH_FIXED3:
        offsets = _PATCH_OFFSETS
    else:
        # One of the 511 non-empty 3x3 masks, drawn once per image.
        bits = int(np.random.default_rng(cfg.rng_seed).integers(1, 512))
        offsets = [off for k, off in enumerate(_PATCH_OFFSETS) if bits >> k & 1]
    for dr, dc in offsets:
        rr = row + dr
        cc = col + dc
        ok = (rr >= 0) & (rr < cfg.height) & (cc >= 0) & (cc < cfg.width)
        canvas[rr[ok], cc[ok]] = 255
    return GrayImage(canvas)


def render(code: IfsCode, cfg: RenderConfig) -> GrayImage:
    """generate_points then rasterize; propagates both failure kinds."""
    return rasterize(generate_points(code, cfg), cfg)


def occupancy(image: GrayImage) -> float:
    """Fraction of non-black pixels."""
    return float(np.count_nonzero(image.pixels) / image.pixels.size)
