"""Cross-component agreement with the regression pipeline's preprocessing.

The extractor package must never import the pipeline; these tests may,
because the whole point is to compare the two implementations through
shared fixtures and prove they agree to 1e-6 per pixel.
"""

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

import vit_extractor
from micropred import preprocess as mp
from vit_extractor import (
    backbone,
    bilinear_resize,
    load_gray,
    preprocess_parity,
    shape_for_backbone,
)

TOL = 1e-6


def save_binary(path, labels):
    Image.fromarray(np.asarray(labels, dtype=np.uint8) * 255, mode="L").save(path)


def save_gray8(path, values):
    data = np.round(np.asarray(values, dtype=np.float64) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def pipeline_plane(img, backend, patch):
    """Primary-side preprocessing, reduced to its grayscale plane."""
    out = mp.preprocess_for_backend(img, mp.PreprocessSpec(backend, patch))
    return out.channels[0]


class TestLoaderParity:
    def test_eight_bit(self, tmp_path):
        save_gray8(tmp_path / "g.png",
                   np.random.default_rng(0).random((23, 31)))
        ours = load_gray(tmp_path / "g.png")
        theirs = mp.load_gray_image(tmp_path / "g.png").pixels
        assert np.array_equal(ours, theirs)

    def test_sixteen_bit(self, tmp_path):
        data = np.random.default_rng(1).integers(0, 65536, (9, 9),
                                                 dtype=np.uint16)
        Image.fromarray(data).save(tmp_path / "h.png")
        ours = load_gray(tmp_path / "h.png")
        theirs = mp.load_gray_image(tmp_path / "h.png").pixels
        assert np.array_equal(ours, theirs)

    def test_color(self, tmp_path):
        rgb = np.random.default_rng(2).integers(0, 256, (8, 12, 3),
                                                dtype=np.uint8)
        Image.fromarray(rgb, mode="RGB").save(tmp_path / "c.png")
        ours = load_gray(tmp_path / "c.png")
        theirs = mp.load_gray_image(tmp_path / "c.png").pixels
        assert np.array_equal(ours, theirs)


class TestShapingParity:
    def test_binary_51_free_size(self, tmp_path):
        # the 51x51 sections crop to 42x42 for patch-14 models
        labels = (np.random.default_rng(3).random((51, 51)) < 0.5)
        save_binary(tmp_path / "s.png", labels)
        ours = shape_for_backbone(load_gray(tmp_path / "s.png"),
                                  backbone("dinov2-b14"))
        theirs = pipeline_plane(mp.PhaseMap(labels.astype(np.uint8)),
                                "DINOV2", 14)
        assert ours.shape == (42, 42)
        assert np.max(np.abs(ours - theirs)) <= TOL

    def test_gray_662x731_fixed_224(self, tmp_path):
        # large micrographs crop to 656x656 and downscale to 224x224
        values = np.random.default_rng(4).random((662, 731))
        save_gray8(tmp_path / "m.png", values)
        gray = load_gray(tmp_path / "m.png")
        ours = shape_for_backbone(gray, backbone("clip-b16"))
        theirs = pipeline_plane(mp.GrayImage(gray), "CLIP", 16)
        assert ours.shape == (224, 224)
        assert np.max(np.abs(ours - theirs)) <= TOL

    def test_gray_658_fixed_1024(self, tmp_path):
        # 658x658 squares upscale to the 1024 fixed input
        values = np.random.default_rng(5).random((658, 658))
        save_gray8(tmp_path / "u.png", values)
        gray = load_gray(tmp_path / "u.png")
        ours = shape_for_backbone(gray, backbone("sam-h"))
        theirs = pipeline_plane(mp.GrayImage(gray), "SAM", 14)
        assert ours.shape == (1024, 1024)
        assert np.max(np.abs(ours - theirs)) <= TOL

    def test_binary_51_replicated_to_1024(self, tmp_path):
        # binary maps replicate (k=21 here) and crop instead of resizing
        labels = (np.random.default_rng(6).random((51, 51)) < 0.3)
        save_binary(tmp_path / "r.png", labels)
        ours = shape_for_backbone(load_gray(tmp_path / "r.png"),
                                  backbone("sam-h"))
        theirs = pipeline_plane(mp.PhaseMap(labels.astype(np.uint8)),
                                "SAM", 14)
        assert ours.shape == (1024, 1024)
        assert np.max(np.abs(ours - theirs)) <= TOL

    def test_bilinear_matches_on_random_sizes(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            h, w = rng.integers(2, 40, 2)
            oh, ow = rng.integers(1, 60, 2)
            arr = rng.random((h, w))
            ours = bilinear_resize(arr, int(oh), int(ow))
            theirs = mp.bilinear_resize(mp.GrayImage(arr),
                                        int(ow), int(oh)).pixels
            assert np.max(np.abs(ours - theirs)) <= TOL

    def test_constant_image_stays_constant(self, tmp_path):
        save_gray8(tmp_path / "k.png", np.full((100, 100), 0.5))
        ours = shape_for_backbone(load_gray(tmp_path / "k.png"),
                                  backbone("clip-b32"))
        assert np.allclose(ours, ours.flat[0])


class TestParityReport:
    def build_fixtures(self, d):
        rng = np.random.default_rng(8)
        labels = (rng.random((51, 51)) < 0.5)
        save_binary(d / "a.png", labels)
        np.save(d / "a.dinov2-b14.npy",
                pipeline_plane(mp.PhaseMap(labels.astype(np.uint8)),
                               "DINOV2", 14))
        values = rng.random((120, 140))
        save_gray8(d / "b.png", values)
        gray = mp.load_gray_image(d / "b.png")
        np.save(d / "b.clip-b16.npy", pipeline_plane(gray, "CLIP", 16))

    def test_report_passes_on_shared_fixtures(self, tmp_path):
        self.build_fixtures(tmp_path)
        report = preprocess_parity(tmp_path)
        assert len(report["cases"]) == 2
        assert report["worst"] <= report["tolerance"]
        shapes = {c["fixture"]: c["shape"] for c in report["cases"]}
        assert shapes["a.dinov2-b14.npy"] == (42, 42)
        assert shapes["b.clip-b16.npy"] == (224, 224)

    def test_report_flags_corrupt_expectation(self, tmp_path):
        self.build_fixtures(tmp_path)
        bad = np.load(tmp_path / "b.clip-b16.npy")
        bad[0, 0] += 0.01
        np.save(tmp_path / "b.clip-b16.npy", bad)
        with pytest.raises(ValueError, match="parity violated"):
            preprocess_parity(tmp_path)

    def test_report_requires_fixtures(self, tmp_path):
        with pytest.raises(ValueError, match="no parity fixtures"):
            preprocess_parity(tmp_path)


def test_package_never_imports_the_pipeline():
    # the two components meet only at file formats; enforce it textually
    pkg_dir = Path(vit_extractor.__file__).parent
    for source in pkg_dir.glob("*.py"):
        assert "micropred" not in source.read_text(encoding="utf-8"), source
