"""Perturbation families built from one real photograph.

Pipeline: RGB -> grayscale -> optional Canny edge map -> L geometric
warps, where the warp parameters live in a small hypercube exactly like
the fractal coefficient perturbations. Affine and polynomial warps are
identity at zero perturbation; the elastic warp applies its base
displacement field even at zero, with the perturbation scaling the
field amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import GrayImage, RenderedClass
from .seeding import derive_seed

KIND_AFFINE = "affine"
KIND_ELASTIC = "elastic"
KIND_POLYNOMIAL = "polynomial"
TRANSFORM_KINDS = (KIND_AFFINE, KIND_ELASTIC, KIND_POLYNOMIAL)

# Parameter counts: affine reuses the six-coefficient layout
# (a, b, e, c, d, f); elastic is a single amplitude factor; the
# degree-2 polynomial has six coefficients per output coordinate.
EPS_DIMS = {KIND_AFFINE: 6, KIND_ELASTIC: 1, KIND_POLYNOMIAL: 12}

# Quadratic terms act on squared normalized coordinates, so their
# perturbation is damped to keep border behavior comparable to the
# linear terms.
_POLY_TERM_SCALE = np.array([1.0, 1.0, 1.0, 0.25, 0.25, 0.25])

CANNY_LOW_DEFAULT = 50.0
CANNY_HIGH_DEFAULT = 150.0


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    delta: float
    rng_seed: int
    elastic_alpha: float = 0.08  # base displacement, fraction of width
    elastic_sigma: float = 8.0  # smoothing width of the field, pixels

    def __post_init__(self) -> None:
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta!r}")
        if self.elastic_sigma <= 0.0:
            raise ValueError(f"elastic_sigma must be > 0, got {self.elastic_sigma!r}")

    @property
    def eps_dim(self) -> int:
        return EPS_DIMS[self.kind]


def to_grayscale(rgb: np.ndarray) -> GrayImage:
    """Rec. 601 luma, computed in exact integer arithmetic so that
    r == g == b == v maps to v for every v."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 RGB array")
    r = arr[:, :, 0].astype(np.uint32)
    g = arr[:, :, 1].astype(np.uint32)
    b = arr[:, :, 2].astype(np.uint32)
    luma = (299 * r + 587 * g + 114 * b + 500) // 1000
    return GrayImage(luma.astype(np.uint8))


def _gaussian_kernel_5x5(sigma: float = 1.4) -> np.ndarray:
    ax = np.arange(-2, 3, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    return k / k.sum()


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def canny(
    img: GrayImage,
    low: float = CANNY_LOW_DEFAULT,
    high: float = CANNY_HIGH_DEFAULT,
) -> GrayImage:
    """Binary edge map: 5x5 Gaussian blur (sigma 1.4), Sobel gradients,
    non-maximum suppression, double threshold with hysteresis."""
    if not 0.0 <= low <= high <= 255.0:
        raise ValueError(f"need 0 <= low <= high <= 255, got {low}, {high}")
    f = img.pixels.astype(np.float64)
    blurred = ndimage.convolve(f, _gaussian_kernel_5x5(), mode="reflect")
    gx = ndimage.convolve(blurred, _SOBEL_X, mode="reflect")
    gy = ndimage.convolve(blurred, _SOBEL_Y, mode="reflect")
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0

    # Non-maximum suppression against the two neighbors along the
    # gradient direction, quantized to 4 directions. Out-of-frame
    # neighbors read as 0 through the zero padding.
    padded = np.pad(mag, 1)

    def shifted(dr: int, dc: int) -> np.ndarray:
        h, w = mag.shape
        return padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]

    horizontal = (ang < 22.5) | (ang >= 157.5)
    diag_down = (ang >= 22.5) & (ang < 67.5)  # gradient toward down-right
    vertical = (ang >= 67.5) & (ang < 112.5)
    # remaining band 112.5..157.5 points down-left and is the default

    n1 = np.select(
        [horizontal, diag_down, vertical],
        [shifted(0, 1), shifted(1, 1), shifted(1, 0)],
        default=shifted(1, -1),
    )
    n2 = np.select(
        [horizontal, diag_down, vertical],
        [shifted(0, -1), shifted(-1, -1), shifted(-1, 0)],
        default=shifted(-1, 1),
    )
    thin = np.where((mag >= n1) & (mag >= n2), mag, 0.0)

    strong = thin >= high
    weak = (thin >= low) & ~strong
    labels, _ = ndimage.label(strong | weak, structure=np.ones((3, 3), dtype=int))
    keep_ids = np.unique(labels[strong])
    keep_ids = keep_ids[keep_ids > 0]
    edges = np.isin(labels, keep_ids)
    return GrayImage(np.where(edges, 255, 0).astype(np.uint8))


def _normalized_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    xn = 2.0 * cols / (width - 1) - 1.0
    yn = 2.0 * rows / (height - 1) - 1.0
    return np.meshgrid(xn, yn)


def _source_coords(
    img_shape: tuple[int, int], spec: TransformSpec, eps: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per output pixel, the (row, col) source coordinates to sample.

    Affine and polynomial displacements are written as offsets from the
    identity grid so that zero perturbation reproduces the grid exactly,
    bit for bit.
    """
    h, w = img_shape
    rows = np.arange(h, dtype=np.float64)[:, None] * np.ones((1, w))
    cols = np.ones((h, 1)) * np.arange(w, dtype=np.float64)[None, :]
    if spec.kind == KIND_ELASTIC:
        rng = np.random.default_rng(spec.rng_seed)
        field = rng.uniform(-1.0, 1.0, size=(2, h, w))
        field[0] = ndimage.gaussian_filter(field[0], spec.elastic_sigma)
        field[1] = ndimage.gaussian_filter(field[1], spec.elastic_sigma)
        amplitude = spec.elastic_alpha * (1.0 + eps[0]) * w
        return rows + amplitude * field[0], cols + amplitude * field[1]

    xn, yn = _normalized_grid(h, w)
    if spec.kind == KIND_AFFINE:
        ea, eb, ee, ec, ed, ef = eps
        dx = ea * xn + eb * yn + ee
        dy = ec * xn + ed * yn + ef
    else:
        basis = np.stack(
            [np.ones_like(xn), xn, yn, xn * xn, xn * yn, yn * yn], axis=0
        )
        cx = eps[:6] * _POLY_TERM_SCALE
        cy = eps[6:] * _POLY_TERM_SCALE
        dx = np.tensordot(cx, basis, axes=1)
        dy = np.tensordot(cy, basis, axes=1)
    return rows + dy * (h - 1) / 2.0, cols + dx * (w - 1) / 2.0


def warp(img: GrayImage, spec: TransformSpec, eps: np.ndarray) -> GrayImage:
    """Inverse-mapping warp with bilinear sampling, zero outside."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (spec.eps_dim,):
        raise ValueError(
            f"{spec.kind} perturbation needs {spec.eps_dim} entries, got {eps.shape}"
        )
    if np.any(np.abs(eps) > spec.delta / 2.0):
        raise ValueError("perturbation leaves the hypercube")
    src_rows, src_cols = _source_coords(img.pixels.shape, spec, eps)
    sampled = ndimage.map_coordinates(
        img.pixels.astype(np.float64),
        [src_rows, src_cols],
        order=1,
        mode="constant",
        cval=0.0,
    )
    return GrayImage(np.floor(sampled + 0.5).astype(np.uint8))


def binarize(img: GrayImage) -> GrayImage:
    return GrayImage(np.where(img.pixels >= 128, 255, 0).astype(np.uint8))


def build_real_family(
    rgb: np.ndarray, use_canny: bool, spec: TransformSpec, count: int
) -> list[RenderedClass]:
    """Grayscale, optionally edge-extract, then warp into ``count``
    labeled classes (class 0 = zero perturbation).

    Bilinear resampling smears a binary edge map, so edge families are
    re-binarized after the warp to keep every output two-valued.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    base = to_grayscale(rgb)
    if use_canny:
        base = canny(base)
    dim = spec.eps_dim
    rng = np.random.default_rng(derive_seed(spec.rng_seed, 1))
    eps_rows = spec.delta * (rng.random((count - 1, dim)) - 0.5)
    out: list[RenderedClass] = []
    for index in range(count):
        eps = np.zeros(dim) if index == 0 else eps_rows[index - 1]
        image = warp(base, spec, eps)
        if use_canny:
            image = binarize(image)
        out.append(
            RenderedClass(
                index=index, image=image, eps=tuple(float(v) for v in eps)
            )
        )
    return out
