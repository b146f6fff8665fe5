import pytest

from onefractal.dataset import (
    CorruptManifest,
    DatasetManifest,
    IoFailure,
    ManifestEntry,
    MissingImage,
    RealImageSource,
    VersionMismatch,
    fractal_manifest,
    montage_from_dataset,
    noise_manifest,
    parse_manifest,
    read_dataset,
    real_manifest,
    regenerate_images,
    serialize_manifest,
    write_dataset,
)
from onefractal.ifs import SigmaTarget, sample_ifs
from onefractal.noise import NoiseSpec, render_noise_family
from onefractal.perturb import render_family, sample_family
from onefractal.realimage import TransformSpec, build_real_family
from onefractal.render import RenderConfig
from onefractal.seeding import derive_seed

from test_realimage import contrasty_rgb


@pytest.fixture(scope="module")
def fractal_bundle():
    code = sample_ifs(2, SigmaTarget(3.5), derive_seed(4, 0))
    family = sample_family(code, 0.1, 6, derive_seed(4, 1))
    cfg = RenderConfig(width=96, height=96, rng_seed=derive_seed(4, 2))
    renders = render_family(family, cfg)
    manifest = fractal_manifest(code, 0.1, cfg, 4, renders)
    return renders, manifest


class TestManifestRoundTrip:
    def test_fractal(self, fractal_bundle):
        _, manifest = fractal_bundle
        text = serialize_manifest(manifest)
        assert parse_manifest(text) == manifest
        assert serialize_manifest(parse_manifest(text)) == text

    def test_noise(self):
        spec = NoiseSpec("uniform", (0.0, 1.0), 0.05, 9)
        renders = render_noise_family(spec, 4, 32, 32)
        manifest = noise_manifest(spec, 32, 32, renders)
        assert parse_manifest(serialize_manifest(manifest)) == manifest

    def test_real(self, tmp_path):
        from PIL import Image

        rgb = contrasty_rgb(48, 48)
        source_png = tmp_path / "src.png"
        Image.fromarray(rgb, mode="RGB").save(source_png)
        spec = TransformSpec("polynomial", 0.1, 5)
        renders = build_real_family(rgb, True, spec, 3)
        manifest = real_manifest(
            RealImageSource(str(source_png), True, spec), renders
        )
        assert parse_manifest(serialize_manifest(manifest)) == manifest
        assert manifest.generator == "real-polynomial"

    def test_serialization_is_canonical(self, fractal_bundle):
        _, manifest = fractal_bundle
        assert serialize_manifest(manifest) == serialize_manifest(manifest)


class TestWriteRead:
    def test_round_trip_pixels(self, tmp_path, fractal_bundle):
        renders, manifest = fractal_bundle
        summary = write_dataset(renders, manifest, tmp_path / "ds")
        assert summary.count == 6
        loaded_manifest, images = read_dataset(tmp_path / "ds")
        assert loaded_manifest == manifest
        for r, img in zip(renders, images):
            assert img == r.image

    def test_layout(self, tmp_path, fractal_bundle):
        renders, manifest = fractal_bundle
        write_dataset(renders, manifest, tmp_path / "ds")
        assert (tmp_path / "ds" / "manifest.json").is_file()
        assert (tmp_path / "ds" / "images" / "000000.png").is_file()
        assert len(list((tmp_path / "ds" / "images").iterdir())) == 6

    def test_parallel_write_same_result(self, tmp_path, fractal_bundle):
        renders, manifest = fractal_bundle
        write_dataset(renders, manifest, tmp_path / "a", threads=1)
        write_dataset(renders, manifest, tmp_path / "b", threads=4)
        _, imgs_a = read_dataset(tmp_path / "a")
        _, imgs_b = read_dataset(tmp_path / "b")
        assert imgs_a == imgs_b

    def test_missing_image(self, tmp_path, fractal_bundle):
        renders, manifest = fractal_bundle
        write_dataset(renders, manifest, tmp_path / "ds")
        victim = tmp_path / "ds" / "images" / "000003.png"
        victim.unlink()
        with pytest.raises(MissingImage) as exc:
            read_dataset(tmp_path / "ds")
        assert "000003.png" in str(exc.value)

    def test_no_manifest_is_invalid(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(CorruptManifest):
            read_dataset(tmp_path / "empty")

    def test_write_failure_maps_to_io(self, tmp_path, fractal_bundle):
        renders, manifest = fractal_bundle
        blocker = tmp_path / "blocker"
        blocker.write_text("file, not a directory")
        with pytest.raises(IoFailure):
            write_dataset(renders, manifest, blocker / "ds")


class TestManifestValidation:
    def test_duplicate_class_index(self, fractal_bundle):
        _, manifest = fractal_bundle
        text = serialize_manifest(manifest)
        corrupted = text.replace('"index": 3', '"index": 2', 1)
        with pytest.raises(CorruptManifest):
            parse_manifest(corrupted)

    def test_version_mismatch(self, fractal_bundle):
        _, manifest = fractal_bundle
        text = serialize_manifest(manifest)
        with pytest.raises(VersionMismatch):
            parse_manifest(text.replace('"format_version": 1', '"format_version": 2'))

    def test_count_mismatch(self, fractal_bundle):
        _, manifest = fractal_bundle
        text = serialize_manifest(manifest)
        with pytest.raises(CorruptManifest):
            parse_manifest(text.replace('"count": 6', '"count": 7'))

    def test_not_json(self):
        with pytest.raises(CorruptManifest):
            parse_manifest("not json at all")

    def test_unknown_generator(self, fractal_bundle):
        _, manifest = fractal_bundle
        text = serialize_manifest(manifest)
        with pytest.raises(CorruptManifest):
            parse_manifest(text.replace('"generator": "fractal"', '"generator": "plasma"'))

    def test_entries_must_match_generator(self):
        entry = ManifestEntry(0, (0.0,), "images/000000.png", 0)
        with pytest.raises(CorruptManifest):
            DatasetManifest(
                generator="fractal", delta=0.1, count=1, base_seed=0, entries=(entry,)
            )


class TestRegeneration:
    def test_fractal_regenerates_pixel_identical(self, fractal_bundle):
        renders, manifest = fractal_bundle
        again = regenerate_images(manifest)
        for r, img in zip(renders, again):
            assert img == r.image

    def test_noise_regenerates_pixel_identical(self):
        spec = NoiseSpec("gaussian", (0.5, 0.15), 0.1, 21)
        renders = render_noise_family(spec, 5, 32, 32)
        manifest = noise_manifest(spec, 32, 32, renders)
        again = regenerate_images(manifest)
        for r, img in zip(renders, again):
            assert img == r.image

    def test_real_regenerates_pixel_identical(self, tmp_path):
        from PIL import Image

        rgb = contrasty_rgb(48, 48)
        source_png = tmp_path / "src.png"
        Image.fromarray(rgb, mode="RGB").save(source_png)
        spec = TransformSpec("affine", 0.1, 5)
        renders = build_real_family(rgb, True, spec, 4)
        manifest = real_manifest(RealImageSource(str(source_png), True, spec), renders)
        again = regenerate_images(manifest)
        for r, img in zip(renders, again):
            assert img == r.image


def test_montage_from_dataset(tmp_path, fractal_bundle):
    renders, manifest = fractal_bundle
    write_dataset(renders, manifest, tmp_path / "ds")
    _, tiled = montage_from_dataset(tmp_path / "ds", 4)
    assert tiled.pixels.shape == (96 * 2, 96 * 2)
