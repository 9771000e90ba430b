import numpy as np
import pytest

from micropred.dataio import Volume3D
from micropred.preprocess import (
    GrayImage,
    PhaseMap,
    PreprocessSpec,
    RgbImage,
    SegmentParams,
    adaptive_threshold,
    bilinear_resize,
    crop_largest_square_multiple,
    crop_to_patch_multiple,
    crop_top_left,
    extract_sections,
    load_gray_image,
    nlm_denoise,
    phase_map_from_gray,
    preprocess_for_backend,
    replicate_upsample,
    save_gray_image,
    save_phase_map,
    save_rgb_image,
    segment,
    to_rgb,
)


class TestSections:
    def test_orientation_oracle(self):
        # distinct dims so any axis mixup changes a shape or a value
        nx, ny, nz = 3, 4, 5
        vox = np.zeros((nx, ny, nz), dtype=np.uint8)
        vox[1, 2, 3] = 1
        vol = Volume3D((nx, ny, nz), vox)
        sx, sy, sz = extract_sections(vol, mode="index", indices=(1, 2, 3))
        assert sx.labels.shape == (ny, nz) and sx.labels[2, 3] == 1
        assert sy.labels.shape == (nx, nz) and sy.labels[1, 3] == 1
        assert sz.labels.shape == (nx, ny) and sz.labels[1, 2] == 1
        assert sx.labels.sum() == sy.labels.sum() == sz.labels.sum() == 1

    def test_center_mode(self):
        vox = np.zeros((4, 6, 8), dtype=np.uint8)
        vox[2, 3, 4] = 1
        vol = Volume3D((4, 6, 8), vox)
        sx, sy, sz = extract_sections(vol)  # centers: 2, 3, 4
        assert sx.labels[3, 4] == 1
        assert sy.labels[2, 4] == 1
        assert sz.labels[2, 3] == 1

    def test_index_out_of_range(self):
        vol = Volume3D((2, 2, 2), np.zeros((2, 2, 2), np.uint8))
        with pytest.raises(ValueError):
            extract_sections(vol, mode="index", indices=(2, 0, 0))


class TestCrops:
    def test_patch_multiple_51_to_42(self):
        img = GrayImage(np.zeros((51, 51)))
        out = crop_to_patch_multiple(img, 14)
        assert out.pixels.shape == (42, 42)

    def test_patch_multiple_662x731_to_658x728(self):
        img = GrayImage(np.zeros((662, 731)))
        out = crop_to_patch_multiple(img, 14)
        assert out.pixels.shape == (658, 728)

    def test_keeps_top_left_content(self, rng):
        data = rng.random((10, 13))
        out = crop_to_patch_multiple(GrayImage(data), 4)
        np.testing.assert_array_equal(out.pixels, data[:8, :12])

    def test_largest_square_662x731_patch16(self):
        out = crop_largest_square_multiple(GrayImage(np.zeros((662, 731))), 16)
        assert out.pixels.shape == (656, 656)

    def test_too_small_for_patch(self):
        with pytest.raises(ValueError):
            crop_to_patch_multiple(GrayImage(np.zeros((10, 10))), 14)

    def test_crop_top_left(self, rng):
        data = rng.random((6, 7))
        out = crop_top_left(GrayImage(data), 5, 4)
        np.testing.assert_array_equal(out.pixels, data[:4, :5])


class TestReplicateUpsample:
    def test_block_structure_oracle(self, rng):
        labels = (rng.random((3, 4)) < 0.5).astype(np.uint8)
        k = 3
        out = replicate_upsample(PhaseMap(labels), k)
        assert out.labels.shape == (9, 12)
        for y in range(9):
            for x in range(12):
                assert out.labels[y, x] == labels[y // k, x // k]

    def test_51_to_255_and_1071(self):
        pm = PhaseMap(np.zeros((51, 51), np.uint8))
        assert replicate_upsample(pm, 5).labels.shape == (255, 255)
        assert replicate_upsample(pm, 21).labels.shape == (1071, 1071)

    def test_preserves_binary_and_fraction(self, rng):
        labels = (rng.random((5, 5)) < 0.4).astype(np.uint8)
        out = replicate_upsample(PhaseMap(labels), 4)
        assert set(np.unique(out.labels)) <= {0, 1}
        assert out.labels.mean() == labels.mean()


class TestBilinear:
    def test_frozen_2x2_to_4x4_oracle(self):
        # half-pixel centers, clamped: src coords [0, 0.25, 0.75, 1]
        img = GrayImage(np.array([[0.0, 1.0], [1.0, 0.0]]))
        out = bilinear_resize(img, 4, 4)
        expected = np.array([
            [0.00, 0.25, 0.75, 1.00],
            [0.25, 0.375, 0.625, 0.75],
            [0.75, 0.625, 0.375, 0.25],
            [1.00, 0.75, 0.25, 0.00],
        ])
        np.testing.assert_allclose(out.pixels, expected, atol=1e-15)

    def test_identity_resize(self, rng):
        data = rng.random((7, 9))
        out = bilinear_resize(GrayImage(data), 9, 7)
        np.testing.assert_allclose(out.pixels, data, atol=1e-15)

    def test_constant_image_stays_constant(self):
        out = bilinear_resize(GrayImage(np.full((5, 5), 0.6)), 13, 3)
        np.testing.assert_allclose(out.pixels, 0.6, atol=1e-15)

    def test_downscale_range_never_grows(self, rng):
        for _ in range(20):
            data = rng.random((12, 15))
            out = bilinear_resize(GrayImage(data), 5, 4).pixels
            assert out.min() >= data.min() - 1e-12
            assert out.max() <= data.max() + 1e-12

    def test_rgb_resized_per_channel(self, rng):
        chans = rng.random((3, 6, 6))
        out = bilinear_resize(RgbImage(chans), 3, 3)
        for c in range(3):
            ref = bilinear_resize(GrayImage(chans[c]), 3, 3).pixels
            np.testing.assert_array_equal(out.channels[c], ref)

    def test_rejects_phase_map(self):
        with pytest.raises(TypeError):
            bilinear_resize(PhaseMap(np.zeros((4, 4), np.uint8)), 2, 2)


class TestBackendPolicies:
    def test_dinov2_crops_only(self):
        out = preprocess_for_backend(GrayImage(np.zeros((51, 51))),
                                     PreprocessSpec("DINOV2", 14))
        assert isinstance(out, RgbImage)
        assert out.channels.shape == (3, 42, 42)

    def test_clip_binary_51_goes_through_255(self, rng):
        labels = (rng.random((51, 51)) < 0.5).astype(np.uint8)
        out = preprocess_for_backend(PhaseMap(labels),
                                     PreprocessSpec("CLIP", 16))
        assert out.channels.shape == (3, 224, 224)
        # replication then crop: pure relabeling, values stay binary
        assert set(np.unique(out.channels)) <= {0.0, 1.0}
        # k = ceil(224/51) = 5; top-left crop of the 255-map
        up = replicate_upsample(PhaseMap(labels), 5)
        np.testing.assert_array_equal(out.channels[0],
                                      up.labels[:224, :224].astype(float))

    def test_sam_binary_51_goes_through_1071(self, rng):
        labels = (rng.random((51, 51)) < 0.5).astype(np.uint8)
        out = preprocess_for_backend(PhaseMap(labels),
                                     PreprocessSpec("SAM", 14))
        assert out.channels.shape == (3, 1024, 1024)
        up = replicate_upsample(PhaseMap(labels), 21)
        np.testing.assert_array_equal(out.channels[0],
                                      up.labels[:1024, :1024].astype(float))

    def test_clip_gray_662x731(self, rng):
        data = rng.random((662, 731))
        out = preprocess_for_backend(GrayImage(data), PreprocessSpec("CLIP", 16))
        assert out.channels.shape == (3, 224, 224)
        ref = bilinear_resize(GrayImage(data[:656, :656]), 224, 224)
        np.testing.assert_array_equal(out.channels[0], ref.pixels)

    def test_sam_gray_goes_to_1024(self, rng):
        data = rng.random((100, 120))
        out = preprocess_for_backend(GrayImage(data), PreprocessSpec("SAM", 14))
        assert out.channels.shape == (3, 1024, 1024)

    def test_none_passthrough(self):
        img = GrayImage(np.zeros((5, 5)))
        assert preprocess_for_backend(img, PreprocessSpec("NONE")) is img

    def test_spec_rejects_wrong_fixed_size(self):
        with pytest.raises(ValueError):
            PreprocessSpec("CLIP", 16, target_size=256)

    def test_spec_rejects_unknown_backend(self):
        with pytest.raises(ValueError):
            PreprocessSpec("RESNET")


def gaussian_kernel_1d(ksize):
    sigma = 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8
    x = np.arange(ksize) - (ksize - 1) / 2.0
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def brute_adaptive_threshold(pixels, block, offset):
    """Per-pixel window oracle: Gaussian local mean with replicated borders."""
    h, w = pixels.shape
    k1 = gaussian_kernel_1d(block)
    k2 = np.outer(k1, k1)
    r = block // 2
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            mean = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    mean += k2[dy + r, dx + r] * pixels[yy, xx]
            out[y, x] = 1 if pixels[y, x] > mean - offset / 255.0 else 0
    return out


def brute_nlm(pixels, h_param, template, search):
    """Per-pixel non-local means oracle with reflect padding."""
    hh, ww = pixels.shape
    tr = template // 2
    sr = search // 2
    pad = sr + tr
    padded = np.pad(pixels, pad, mode="reflect")
    k1 = gaussian_kernel_1d(template)
    k2 = np.outer(k1, k1)
    h_f = h_param / 255.0
    out = np.zeros((hh, ww))
    for y in range(hh):
        for x in range(ww):
            cy, cx = y + pad, x + pad
            num = 0.0
            den = 0.0
            for dy in range(-sr, sr + 1):
                for dx in range(-sr, sr + 1):
                    d2 = 0.0
                    for u in range(-tr, tr + 1):
                        for v in range(-tr, tr + 1):
                            diff = (padded[cy + u, cx + v]
                                    - padded[cy + dy + u, cx + dx + v])
                            d2 += k2[u + tr, v + tr] * diff * diff
                    wgt = np.exp(-d2 / (h_f * h_f))
                    num += wgt * padded[cy + dy, cx + dx]
                    den += wgt
            out[y, x] = num / den
    return out


class TestSegmentation:
    def test_adaptive_threshold_matches_window_oracle(self, rng):
        for _ in range(10):
            pixels = rng.random((9, 11))
            got = adaptive_threshold(GrayImage(pixels), 5, 2.0).labels
            want = brute_adaptive_threshold(pixels, 5, 2.0)
            np.testing.assert_array_equal(got, want)

    def test_adaptive_threshold_zero_offset_tie(self):
        # pixel == local mean is NOT above it, so flat areas label 0 at c=0
        got = adaptive_threshold(GrayImage(np.full((6, 6), 0.5)), 3, 0.0)
        assert got.labels.sum() == 0

    def test_adaptive_threshold_flat_labels_one_with_offset(self):
        # any positive offset pushes the local mean below flat pixels
        got = adaptive_threshold(GrayImage(np.full((6, 6), 0.5)), 3, 2.0)
        assert got.labels.all()

    def test_block_larger_than_image(self):
        with pytest.raises(ValueError, match="larger than image"):
            adaptive_threshold(GrayImage(np.zeros((4, 4))), 11, 2.0)

    def test_nlm_matches_loop_oracle(self, rng):
        pixels = rng.random((8, 9))
        got = nlm_denoise(GrayImage(pixels), 10.0, template=3, search=5).pixels
        want = brute_nlm(pixels, 10.0, 3, 5)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_nlm_zero_strength_is_identity(self, rng):
        pixels = rng.random((6, 6))
        out = nlm_denoise(GrayImage(pixels), 0.0, template=3, search=5)
        np.testing.assert_array_equal(out.pixels, pixels)

    def test_nlm_smooths_noise(self, rng):
        clean = np.tile([0.2, 0.2, 0.8, 0.8], (16, 4))
        noisy = np.clip(clean + rng.normal(0, 0.05, clean.shape), 0, 1)
        out = nlm_denoise(GrayImage(noisy), 20.0, template=3, search=7).pixels
        assert np.abs(out - clean).mean() < np.abs(noisy - clean).mean()

    def test_segment_minority_polarity(self, rng):
        # bright blob on dark background: the blob is the minority phase
        pixels = np.full((24, 24), 0.2)
        pixels[4:9, 4:9] = 0.9
        pixels = np.clip(pixels + rng.normal(0, 0.01, pixels.shape), 0, 1)
        out = segment(GrayImage(pixels), SegmentParams(denoise_h=5.0,
                                                       template=3, search=7,
                                                       block=11, offset=2.0))
        assert out.labels.sum() * 2 <= out.labels.size

    def test_segment_output_binary(self, rng):
        pixels = rng.random((16, 16))
        out = segment(GrayImage(pixels), SegmentParams(denoise_h=5.0,
                                                       template=3, search=7,
                                                       block=5, offset=2.0))
        assert set(np.unique(out.labels)) <= {0, 1}

    def test_params_validated(self):
        with pytest.raises(ValueError):
            SegmentParams(block=10)
        with pytest.raises(ValueError):
            SegmentParams(template=4)
        with pytest.raises(ValueError):
            SegmentParams(denoise_h=-1)


class TestImageIO:
    def test_gray_round_trip(self, tmp_path, rng):
        data = np.round(rng.random((9, 7)) * 255) / 255.0
        path = tmp_path / "g.png"
        save_gray_image(GrayImage(data), path)
        back = load_gray_image(path)
        np.testing.assert_allclose(back.pixels, data, atol=1e-12)

    def test_phase_map_round_trip(self, tmp_path, rng):
        labels = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        path = tmp_path / "p.png"
        save_phase_map(PhaseMap(labels), path)
        back = load_gray_image(path)
        pm = phase_map_from_gray(back)
        np.testing.assert_array_equal(pm.labels, labels)

    def test_rgb_round_trip(self, tmp_path):
        chans = np.round(np.random.default_rng(0).random((3, 5, 6)) * 255) / 255.0
        path = tmp_path / "c.png"
        save_rgb_image(RgbImage(chans), path)
        from PIL import Image
        with Image.open(path) as im:
            assert im.size == (6, 5)
            assert im.mode == "RGB"

    def test_phase_map__from_gray_strict(self):
        with pytest.raises(ValueError, match="not binary"):
            phase_map_from_gray(GrayImage(np.full((3, 3), 0.5)))

    def test_to_rgb_stacks_three_identical(self, rng):
        data = rng.random((4, 5))
        out = to_rgb(GrayImage(data))
        for c in range(3):
            np.testing.assert_array_equal(out.channels[c], data)
