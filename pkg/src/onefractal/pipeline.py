"""End-to-end dataset workflows: search, render, persist, probe.

All randomness in a workflow flows from one master seed; the search,
perturbation, and render stages get separate derived streams so no two
stages replay the same underlying uniforms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from .ifs import IfsCode, SigmaTarget, sample_ifs
from .image import GrayImage, read_rgb
from .noise import NoiseSpec, render_noise_family
from .perturb import Perturbation, apply_perturbation, render_family, sample_family
from .probe import TrainConfig, crop_views, image_features, train
from .realimage import TransformSpec, build_real_family
from .render import RenderConfig, render, warmup
from .seeding import derive_seed, splitmix64

_STREAM_SEARCH = 0
_STREAM_FAMILY = 1
_STREAM_RENDER = 2

DEFAULT_N_MAPS = 2
DEFAULT_SIGMA = 3.5
DEFAULT_DELTA = 0.1
DEFAULT_COUNT = 1000


@dataclass(frozen=True)
class GenerateResult:
    manifest: ds.DatasetManifest
    summary: ds.WriteSummary


def generate_fractal_dataset(
    out_dir: str | Path,
    *,
    code: IfsCode | None = None,
    sigma: float = DEFAULT_SIGMA,
    tolerance: float = 1e-6,
    n_maps: int = DEFAULT_N_MAPS,
    delta: float = DEFAULT_DELTA,
    count: int = DEFAULT_COUNT,
    seed: int = 0,
    render_cfg: RenderConfig | None = None,
    threads: int = 1,
) -> GenerateResult:
    """Search (unless a code is given), render the family, write it out."""
    if render_cfg is None:
        render_cfg = RenderConfig()
    warmup()

    t0 = time.perf_counter()
    if code is None:
        code = sample_ifs(
            n_maps, SigmaTarget(sigma, tolerance), derive_seed(seed, _STREAM_SEARCH)
        )
    search_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    family = sample_family(code, delta, count, derive_seed(seed, _STREAM_FAMILY))
    render_cfg = render_cfg.with_seed(derive_seed(seed, _STREAM_RENDER))
    renders = render_family(family, render_cfg, threads=threads)
    render_seconds = time.perf_counter() - t0

    manifest = ds.fractal_manifest(code, delta, render_cfg, seed, renders)
    summary = ds.write_dataset(
        renders,
        manifest,
        out_dir,
        search_seconds=search_seconds,
        render_seconds=render_seconds,
        threads=threads,
    )
    return GenerateResult(manifest=manifest, summary=summary)


def generate_noise_dataset(
    out_dir: str | Path,
    *,
    kind: str,
    params: tuple[float, float],
    delta: float,
    count: int,
    seed: int = 0,
    width: int = 256,
    height: int = 256,
    threads: int = 1,
) -> GenerateResult:
    spec = NoiseSpec(kind=kind, params=params, delta=delta, rng_seed=seed)
    t0 = time.perf_counter()
    renders = render_noise_family(spec, count, width, height)
    render_seconds = time.perf_counter() - t0
    manifest = ds.noise_manifest(spec, width, height, renders)
    summary = ds.write_dataset(
        renders, manifest, out_dir, render_seconds=render_seconds, threads=threads
    )
    return GenerateResult(manifest=manifest, summary=summary)


def generate_real_dataset(
    out_dir: str | Path,
    *,
    input_path: str | Path,
    use_canny: bool,
    transform_kind: str,
    delta: float,
    count: int,
    seed: int = 0,
    threads: int = 1,
) -> GenerateResult:
    spec = TransformSpec(kind=transform_kind, delta=delta, rng_seed=seed)
    rgb = read_rgb(input_path)
    t0 = time.perf_counter()
    renders = build_real_family(rgb, use_canny, spec, count)
    render_seconds = time.perf_counter() - t0
    source = ds.RealImageSource(
        path=str(input_path), use_canny=use_canny, transform=spec
    )
    manifest = ds.real_manifest(source, renders)
    summary = ds.write_dataset(
        renders, manifest, out_dir, render_seconds=render_seconds, threads=threads
    )
    return GenerateResult(manifest=manifest, summary=summary)


def rerender_fractal_classes(
    manifest: ds.DatasetManifest, seed_salt: int | None = None
) -> list[GrayImage]:
    """Fresh renders of every class: same perturbations, different
    chaos-game seeds.

    This is the fractal probe holdout: the same shapes sampled anew, so
    the probe must recognize shape rather than memorized pixels.
    """
    if manifest.generator != ds.GEN_FRACTAL:
        raise ValueError("re-rendering applies to fractal datasets only")
    cfg = manifest.render
    fresh = cfg.with_seed(splitmix64(cfg.rng_seed if seed_salt is None else seed_salt))
    out = []
    for entry in manifest.entries:
        perturbed = apply_perturbation(
            manifest.code, Perturbation(np.asarray(entry.eps), manifest.delta)
        )
        out.append(render(perturbed, fresh))
    return out


def _downsample(img: GrayImage, resolution: int) -> GrayImage:
    feats = image_features(img, resolution)
    px = np.floor(feats.reshape(resolution, resolution) * 255.0 + 0.5)
    return GrayImage(px.astype(np.uint8))


def probe_dataset(dataset_dir: str | Path, cfg: TrainConfig) -> dict:
    """Train the probe on a dataset directory and report holdout accuracy.

    Fractal families hold out re-rendered classes; noise and real-image
    families hold out random crop views of each class image.
    """
    manifest, images = ds.read_dataset(dataset_dir)
    labels = [e.index for e in manifest.entries]

    if manifest.generator == ds.GEN_FRACTAL:
        warmup()
        train_set = list(zip(images, labels))
        holdout_set = list(zip(rerender_fractal_classes(manifest), labels))
        run_cfg = cfg
    else:
        crop = max(1, round(cfg.input_resolution * 7 / 8))
        views_per_class = 8
        holdout_per_class = max(1, round(views_per_class * cfg.holdout_fraction))
        train_set, holdout_set = [], []
        for img, label in zip(images, labels):
            small = _downsample(img, cfg.input_resolution)
            views = crop_views(
                small, crop, views_per_class, derive_seed(cfg.rng_seed, label)
            )
            for v in views[:holdout_per_class]:
                holdout_set.append((v, label))
            for v in views[holdout_per_class:]:
                train_set.append((v, label))
        run_cfg = TrainConfig(
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            input_resolution=crop,
            rng_seed=cfg.rng_seed,
            holdout_fraction=cfg.holdout_fraction,
        )

    result = train(train_set, holdout_set, run_cfg)
    return {
        "accuracy": result.holdout_accuracy,
        "chance": result.chance,
        "ratio": result.ratio,
        "epochs": run_cfg.epochs,
        "seed": run_cfg.rng_seed,
    }
