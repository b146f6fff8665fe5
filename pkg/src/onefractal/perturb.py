"""Perturbation families: the label space of a single-fractal dataset.

A family is one base IFS plus L perturbation vectors drawn uniformly
from the hypercube [-delta/2, delta/2]^(6N), six coordinates per map.
Each perturbation is a class; class 0 is reserved for the zero vector
so the unperturbed image is always present. Rendering a family resamples
perturbations whose system diverges, keeping all L classes usable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ifs import AffineMap, IfsCode, derive_probs
from .image import RenderedClass
from .render import DegenerateExtent, Diverged, RenderConfig, render
from .seeding import derive_seed

COORDS_PER_MAP = 6
MAX_RESAMPLE_ATTEMPTS = 100


class ResampleExhausted(Exception):
    """A class index kept producing unusable systems after the full
    resample budget."""


@dataclass(frozen=True, eq=False)
class Perturbation:
    """One point of the hypercube, ordered (a, b, e, c, d, f) per map to
    mirror the 2x3 coefficient matrix row by row."""

    eps: np.ndarray  # (6N,) float64
    delta: float

    def __post_init__(self) -> None:
        eps = np.asarray(self.eps, dtype=np.float64)
        object.__setattr__(self, "eps", eps)
        if eps.ndim != 1 or eps.size % COORDS_PER_MAP != 0 or eps.size == 0:
            raise ValueError(f"eps must have 6 entries per map, got shape {eps.shape}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta!r}")
        if np.any(np.abs(eps) > self.delta / 2.0):
            raise ValueError("perturbation leaves the hypercube")

    @property
    def n_maps(self) -> int:
        return self.eps.size // COORDS_PER_MAP

    def hypercube_volume(self) -> float:
        """Volume of the support, delta^(6N)."""
        return self.delta ** self.eps.size

    def is_zero(self) -> bool:
        return bool(np.all(self.eps == 0.0))


@dataclass(frozen=True, eq=False)
class PerturbedFamily:
    base: IfsCode
    delta: float
    perturbations: tuple[Perturbation, ...]
    rng_seed: int

    def __post_init__(self) -> None:
        if len(self.perturbations) < 1:
            raise ValueError("family must contain at least one perturbation")
        if not self.perturbations[0].is_zero():
            raise ValueError("class 0 must carry the zero perturbation")
        for p in self.perturbations:
            if p.delta != self.delta:
                raise ValueError("all perturbations must share the family delta")
            if p.n_maps != self.base.n_maps:
                raise ValueError("perturbation length does not match the base code")

    @property
    def size(self) -> int:
        return len(self.perturbations)


def _draw_eps(rng: np.random.Generator, delta: float, n_coords: int) -> np.ndarray:
    # delta * (u - 1/2) keeps draws exactly proportional across delta
    # values for a fixed seed, which the monotone-support checks rely on.
    return delta * (rng.random(n_coords) - 0.5)


def sample_family(
    base: IfsCode, delta: float, count: int, rng_seed: int
) -> PerturbedFamily:
    """Draw a family of ``count`` perturbations, class 0 being zero."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")
    n_coords = COORDS_PER_MAP * base.n_maps
    rng = np.random.default_rng(rng_seed)
    perturbations = [Perturbation(np.zeros(n_coords), delta)]
    for _ in range(count - 1):
        perturbations.append(Perturbation(_draw_eps(rng, delta, n_coords), delta))
    return PerturbedFamily(
        base=base, delta=delta, perturbations=tuple(perturbations), rng_seed=rng_seed
    )


def apply_perturbation(base: IfsCode, p: Perturbation) -> IfsCode:
    """Add the perturbation to the base coefficients.

    Selection probabilities are re-derived from the perturbed
    determinants; the perturbation itself never touches them.
    """
    if p.n_maps != base.n_maps:
        raise ValueError(
            f"perturbation covers {p.n_maps} maps, code has {base.n_maps}"
        )
    maps = []
    for j, m in enumerate(base.maps):
        ea, eb, ee, ec, ed, ef = p.eps[6 * j : 6 * j + 6]
        maps.append(
            AffineMap(
                a=m.a + ea,
                b=m.b + eb,
                c=m.c + ec,
                d=m.d + ed,
                e=m.e + ee,
                f=m.f + ef,
            )
        )
    return IfsCode(maps=tuple(maps), probs=derive_probs(maps), seed=base.seed)


def _render_one(family: PerturbedFamily, cfg: RenderConfig, index: int) -> RenderedClass:
    # Every class renders with the same chaos stream: at delta 0 the
    # family then collapses to L bit-identical copies of the base image,
    # the discrete counterpart of the perturbation distribution
    # collapsing onto the single image.
    eps = family.perturbations[index]
    resample_rng: np.random.Generator | None = None
    n_coords = COORDS_PER_MAP * family.base.n_maps
    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        try:
            image = render(apply_perturbation(family.base, eps), cfg)
            return RenderedClass(
                index=index,
                image=image,
                eps=tuple(float(v) for v in eps.eps),
                resamples=attempt,
            )
        except (Diverged, DegenerateExtent) as exc:
            if index == 0:
                # Class 0 is pinned to the zero perturbation; a failing
                # base render cannot be fixed by redrawing.
                raise ResampleExhausted(
                    f"unperturbed base render failed: {exc}"
                ) from exc
            if resample_rng is None:
                resample_rng = np.random.default_rng(
                    derive_seed(family.rng_seed, family.size + index)
                )
            eps = Perturbation(
                _draw_eps(resample_rng, family.delta, n_coords), family.delta
            )
    raise ResampleExhausted(
        f"class {index}: no usable perturbation in {MAX_RESAMPLE_ATTEMPTS} attempts"
    )


def render_family(
    family: PerturbedFamily, cfg: RenderConfig, threads: int = 1
) -> list[RenderedClass]:
    """Render every class against one shared chaos stream.

    Classes whose perturbed system diverges (or collapses) get a fresh
    perturbation from a per-index stream, up to MAX_RESAMPLE_ATTEMPTS;
    the perturbation actually rendered and the resample count are
    reported per class. Output is identical for any thread count.
    """
    indices = range(family.size)
    if threads <= 1:
        return [_render_one(family, cfg, i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: _render_one(family, cfg, i), indices))
