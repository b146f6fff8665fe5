"""Gaussian- and uniform-noise control arms.

Single noise images parameterized by (mean, sd) or (low, high); classes
perturb the parameter pair inside the usual hypercube. These arms exist
to be compared against the fractal families, not to train well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import GrayImage, RenderedClass
from .perturb import MAX_RESAMPLE_ATTEMPTS, ResampleExhausted
from .seeding import derive_seed

KIND_GAUSSIAN = "gaussian"
KIND_UNIFORM = "uniform"
NOISE_KINDS = (KIND_GAUSSIAN, KIND_UNIFORM)

N_PARAMS = 2


class InvalidParams(Exception):
    """Noise distribution parameters are unusable."""


def _check_params(kind: str, params: tuple[float, float]) -> None:
    a, b = params
    if not (np.isfinite(a) and np.isfinite(b)):
        raise InvalidParams(f"non-finite parameters {params!r}")
    if kind == KIND_GAUSSIAN and b < 0.0:
        raise InvalidParams(f"gaussian sd must be >= 0, got {b!r}")
    if kind == KIND_UNIFORM and a > b:
        raise InvalidParams(f"uniform bounds out of order: {params!r}")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    params: tuple[float, float]  # gaussian: (mu, sd); uniform: (low, high)
    delta: float
    rng_seed: int

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise InvalidParams(f"unknown noise kind {self.kind!r}")
        if self.delta < 0.0:
            raise InvalidParams(f"delta must be >= 0, got {self.delta!r}")
        _check_params(self.kind, self.params)


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def sample_pixels(
    spec: NoiseSpec, params: tuple[float, float], shape: tuple[int, int], seed: int
) -> GrayImage:
    rng = np.random.default_rng(seed)
    if spec.kind == KIND_GAUSSIAN:
        mu, sd = params
        values = mu + sd * rng.standard_normal(shape)
    else:
        low, high = params
        values = low + (high - low) * rng.random(shape)
    return GrayImage(_quantize(values))


def render_noise_family(
    spec: NoiseSpec, count: int, width: int, height: int
) -> list[RenderedClass]:
    """One image per parameter perturbation; class 0 is unperturbed.

    Perturbed parameter pairs that are invalid (negative sd, crossed
    bounds) are redrawn from a per-index stream, mirroring the fractal
    family policy.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if width < 1 or height < 1:
        raise ValueError(f"bad image size {width}x{height}")
    rng = np.random.default_rng(spec.rng_seed)
    eps_rows = spec.delta * (rng.random((count - 1, N_PARAMS)) - 0.5)

    out: list[RenderedClass] = []
    for index in range(count):
        eps = np.zeros(N_PARAMS) if index == 0 else eps_rows[index - 1]
        resample_rng: np.random.Generator | None = None
        for attempt in range(MAX_RESAMPLE_ATTEMPTS):
            perturbed = (spec.params[0] + eps[0], spec.params[1] + eps[1])
            try:
                _check_params(spec.kind, perturbed)
            except InvalidParams:
                if index == 0:
                    raise  # the base parameters themselves are unusable
                if resample_rng is None:
                    resample_rng = np.random.default_rng(
                        derive_seed(spec.rng_seed, count + index)
                    )
                eps = spec.delta * (resample_rng.random(N_PARAMS) - 0.5)
                continue
            image = sample_pixels(
                spec, perturbed, (height, width), derive_seed(spec.rng_seed, index)
            )
            out.append(
                RenderedClass(
                    index=index,
                    image=image,
                    eps=tuple(float(v) for v in eps),
                    resamples=attempt,
                )
            )
            break
        else:
            raise ResampleExhausted(
                f"class {index}: no valid parameters in {MAX_RESAMPLE_ATTEMPTS} attempts"
            )
    return out
