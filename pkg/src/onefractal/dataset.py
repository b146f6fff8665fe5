"""Dataset persistence and regeneration.

A dataset directory is images/ plus manifest.json; the manifest records
the complete generator configuration and every class's perturbation, so
the images are pure derived data: regenerate_images() rebuilds them
pixel for pixel from the manifest alone. The manifest is written last
and acts as the commit point.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import jsonio
from .ifs import IfsCode
from .image import GrayImage, RenderedClass, montage, read_png, read_rgb, write_png
from .noise import NoiseSpec, sample_pixels
from .perturb import Perturbation, apply_perturbation
from .realimage import TransformSpec, binarize, canny, to_grayscale, warp
from .render import RenderConfig, render
from .seeding import derive_seed

FORMAT_VERSION = 1

GEN_FRACTAL = "fractal"
GEN_GAUSSIAN = "gaussian"
GEN_UNIFORM = "uniform"
GEN_REAL_PREFIX = "real-"

IMAGE_SUBDIR = "images"
MANIFEST_NAME = "manifest.json"


class IoFailure(Exception):
    """Filesystem operation failed; the message names the path."""


class CorruptManifest(Exception):
    pass


class MissingImage(Exception):
    pass


class VersionMismatch(Exception):
    pass


@dataclass(frozen=True)
class RealImageSource:
    path: str
    use_canny: bool
    transform: TransformSpec


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    eps: tuple[float, ...]
    filename: str
    resamples: int


@dataclass(frozen=True)
class DatasetManifest:
    generator: str
    delta: float
    count: int
    base_seed: int
    entries: tuple[ManifestEntry, ...]
    code: IfsCode | None = None
    render: RenderConfig | None = None
    noise: NoiseSpec | None = None
    size: tuple[int, int] | None = None  # (width, height) for noise arms
    real: RealImageSource | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if len(self.entries) != self.count:
            raise CorruptManifest(
                f"{len(self.entries)} entries for count {self.count}"
            )
        if [e.index for e in self.entries] != list(range(self.count)):
            raise CorruptManifest("class indices must be exactly 0..count-1, in order")
        names = [e.filename for e in self.entries]
        if len(set(names)) != len(names):
            raise CorruptManifest("entry filenames must be unique")
        if self.generator == GEN_FRACTAL:
            if self.code is None or self.render is None:
                raise CorruptManifest("fractal manifest needs code and render config")
        elif self.generator in (GEN_GAUSSIAN, GEN_UNIFORM):
            if self.noise is None or self.size is None:
                raise CorruptManifest("noise manifest needs noise spec and size")
        elif self.generator.startswith(GEN_REAL_PREFIX):
            if self.real is None:
                raise CorruptManifest("real-image manifest needs its source record")
        else:
            raise CorruptManifest(f"unknown generator {self.generator!r}")


def _entries_from_renders(renders: Sequence[RenderedClass]) -> tuple[ManifestEntry, ...]:
    return tuple(
        ManifestEntry(
            index=r.index,
            eps=r.eps,
            filename=f"{IMAGE_SUBDIR}/{r.index:06d}.png",
            resamples=r.resamples,
        )
        for r in renders
    )


def fractal_manifest(
    code: IfsCode,
    delta: float,
    render_cfg: RenderConfig,
    base_seed: int,
    renders: Sequence[RenderedClass],
) -> DatasetManifest:
    return DatasetManifest(
        generator=GEN_FRACTAL,
        delta=delta,
        count=len(renders),
        base_seed=base_seed,
        entries=_entries_from_renders(renders),
        code=code,
        render=render_cfg,
    )


def noise_manifest(
    spec: NoiseSpec, width: int, height: int, renders: Sequence[RenderedClass]
) -> DatasetManifest:
    return DatasetManifest(
        generator=spec.kind,
        delta=spec.delta,
        count=len(renders),
        base_seed=spec.rng_seed,
        entries=_entries_from_renders(renders),
        noise=spec,
        size=(width, height),
    )


def real_manifest(
    source: RealImageSource, renders: Sequence[RenderedClass]
) -> DatasetManifest:
    return DatasetManifest(
        generator=GEN_REAL_PREFIX + source.transform.kind,
        delta=source.transform.delta,
        count=len(renders),
        base_seed=source.transform.rng_seed,
        entries=_entries_from_renders(renders),
        real=source,
    )


def _render_doc(cfg: RenderConfig) -> dict:
    return {
        "point_count": cfg.point_count,
        "burn_in": cfg.burn_in,
        "width": cfg.width,
        "height": cfg.height,
        "padding": cfg.padding,
        "patch_mode": cfg.patch_mode,
        "rng_seed": cfg.rng_seed,
    }


def serialize_manifest(m: DatasetManifest) -> str:
    doc: dict = {
        "format_version": m.format_version,
        "generator": m.generator,
        "delta": m.delta,
        "count": m.count,
        "base_seed": m.base_seed,
    }
    if m.code is not None:
        doc["code"] = m.code.to_doc()
    if m.render is not None:
        doc["render"] = _render_doc(m.render)
    if m.noise is not None:
        doc["noise"] = {
            "kind": m.noise.kind,
            "params": list(m.noise.params),
            "delta": m.noise.delta,
            "rng_seed": m.noise.rng_seed,
        }
    if m.size is not None:
        doc["size"] = list(m.size)
    if m.real is not None:
        t = m.real.transform
        doc["real"] = {
            "path": m.real.path,
            "canny": m.real.use_canny,
            "transform": {
                "kind": t.kind,
                "delta": t.delta,
                "rng_seed": t.rng_seed,
                "elastic_alpha": t.elastic_alpha,
                "elastic_sigma": t.elastic_sigma,
            },
        }
    doc["entries"] = [
        {
            "index": e.index,
            "eps": list(e.eps),
            "filename": e.filename,
            "resamples": e.resamples,
        }
        for e in m.entries
    ]
    return jsonio.dumps_canonical(doc)


def parse_manifest(text: str) -> DatasetManifest:
    try:
        doc = jsonio.loads(text)
    except ValueError as exc:
        raise CorruptManifest(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptManifest("manifest must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format_version {version!r}, expected {FORMAT_VERSION}")
    try:
        entries = tuple(
            ManifestEntry(
                index=e["index"],
                eps=tuple(float(v) for v in e["eps"]),
                filename=e["filename"],
                resamples=e["resamples"],
            )
            for e in doc["entries"]
        )
        code = IfsCode.from_doc(doc["code"]) if "code" in doc else None
        render_cfg = RenderConfig(**doc["render"]) if "render" in doc else None
        noise = (
            NoiseSpec(
                kind=doc["noise"]["kind"],
                params=tuple(doc["noise"]["params"]),
                delta=doc["noise"]["delta"],
                rng_seed=doc["noise"]["rng_seed"],
            )
            if "noise" in doc
            else None
        )
        size = tuple(doc["size"]) if "size" in doc else None
        real = (
            RealImageSource(
                path=doc["real"]["path"],
                use_canny=doc["real"]["canny"],
                transform=TransformSpec(**doc["real"]["transform"]),
            )
            if "real" in doc
            else None
        )
        return DatasetManifest(
            generator=doc["generator"],
            delta=doc["delta"],
            count=doc["count"],
            base_seed=doc["base_seed"],
            entries=entries,
            code=code,
            render=render_cfg,
            noise=noise,
            size=size,
            real=real,
        )
    except CorruptManifest:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptManifest(f"bad manifest field: {exc}") from exc


@dataclass(frozen=True)
class WriteSummary:
    count: int
    search_seconds: float
    render_seconds: float
    write_seconds: float
    total_seconds: float

    def to_doc(self) -> dict:
        return {
            "count": self.count,
            "search": self.search_seconds,
            "render": self.render_seconds,
            "write": self.write_seconds,
            "total": self.total_seconds,
        }


def write_dataset(
    renders: Sequence[RenderedClass],
    manifest: DatasetManifest,
    out_dir: str | Path,
    search_seconds: float = 0.0,
    render_seconds: float = 0.0,
    threads: int = 1,
) -> WriteSummary:
    """Write PNGs under images/ and the manifest last."""
    if len(renders) != manifest.count:
        raise ValueError(f"{len(renders)} renders for manifest count {manifest.count}")
    out = Path(out_dir)
    started = time.perf_counter()
    try:
        (out / IMAGE_SUBDIR).mkdir(parents=True, exist_ok=True)
        jobs = list(zip(renders, manifest.entries))
        if threads <= 1:
            for r, entry in jobs:
                write_png(r.image, out / entry.filename)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(lambda j: write_png(j[0].image, out / j[1].filename), jobs))
        (out / MANIFEST_NAME).write_text(serialize_manifest(manifest))
    except OSError as exc:
        raise IoFailure(f"cannot write dataset under {out}: {exc}") from exc
    write_seconds = time.perf_counter() - started
    return WriteSummary(
        count=manifest.count,
        search_seconds=search_seconds,
        render_seconds=render_seconds,
        write_seconds=write_seconds,
        total_seconds=search_seconds + render_seconds + write_seconds,
    )


def read_dataset(dataset_dir: str | Path) -> tuple[DatasetManifest, list[GrayImage]]:
    """Load and validate a dataset directory."""
    root = Path(dataset_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise CorruptManifest(f"no {MANIFEST_NAME} in {root}")
    manifest = parse_manifest(manifest_path.read_text())
    images = []
    for entry in manifest.entries:
        path = root / entry.filename
        if not path.is_file():
            raise MissingImage(str(path))
        images.append(read_png(path))
    return manifest, images


def regenerate_images(
    manifest: DatasetManifest, source_root: str | Path | None = None
) -> list[GrayImage]:
    """Rebuild every image from the manifest's recorded provenance.

    For real-image families the source photograph is read from its
    recorded path, resolved against ``source_root`` when given.
    """
    if manifest.generator == GEN_FRACTAL:
        code, cfg = manifest.code, manifest.render
        out = []
        for entry in manifest.entries:
            perturbed = apply_perturbation(
                code, Perturbation(np.asarray(entry.eps), manifest.delta)
            )
            out.append(render(perturbed, cfg))
        return out
    if manifest.generator in (GEN_GAUSSIAN, GEN_UNIFORM):
        spec = manifest.noise
        width, height = manifest.size
        return [
            sample_pixels(
                spec,
                (spec.params[0] + entry.eps[0], spec.params[1] + entry.eps[1]),
                (height, width),
                derive_seed(spec.rng_seed, entry.index),
            )
            for entry in manifest.entries
        ]
    source = manifest.real
    path = Path(source.path)
    if source_root is not None and not path.is_absolute():
        path = Path(source_root) / path
    base = to_grayscale(read_rgb(path))
    if source.use_canny:
        base = canny(base)
    out = []
    for entry in manifest.entries:
        image = warp(base, source.transform, np.asarray(entry.eps))
        if source.use_canny:
            image = binarize(image)
        out.append(image)
    return out


def montage_from_dataset(
    dataset_dir: str | Path, k: int
) -> tuple[DatasetManifest, GrayImage]:
    manifest, images = read_dataset(dataset_dir)
    return manifest, montage(images, k)
