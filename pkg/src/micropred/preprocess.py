"""Deterministic image surgery applied before feature extraction.

Covers section extraction from 3D volumes, patch-multiple cropping,
pixel-replication upsampling, largest-square cropping, bilinear resizing
(half-pixel centers, no antialias), grayscale->RGB expansion, and the
denoise + adaptive-threshold segmentation workflow for experimental
micrographs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .dataio import Volume3D

__all__ = [
    "GrayImage",
    "PhaseMap",
    "RgbImage",
    "PreprocessSpec",
    "SegmentParams",
    "extract_sections",
    "crop_to_patch_multiple",
    "replicate_upsample",
    "crop_top_left",
    "crop_largest_square_multiple",
    "bilinear_resize",
    "to_rgb",
    "segment",
    "nlm_denoise",
    "adaptive_threshold",
    "preprocess_for_backend",
    "load_gray_image",
    "save_gray_image",
    "save_phase_map",
    "save_rgb_image",
    "phase_map_from_gray",
]


@dataclass(frozen=True)
class GrayImage:
    """Grayscale image, row-major reals in [0, 1], shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError("gray image must be a non-empty 2D array")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("gray values must lie in [0, 1]")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PhaseMap:
    """Segmented two-phase image with labels in {0, 1}, shape (height, width)."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise ValueError("phase map must be a non-empty 2D array")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("phase labels must be 0 or 1")
        labels = labels.astype(np.uint8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """Three equal-size planes of reals in [0, 1], shape (3, height, width)."""

    channels: np.ndarray

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        if channels.ndim != 3 or channels.shape[0] != 3:
            raise ValueError("rgb image must have shape (3, height, width)")
        if channels.min() < 0.0 or channels.max() > 1.0:
            raise ValueError("rgb values must lie in [0, 1]")
        channels.setflags(write=False)
        object.__setattr__(self, "channels", channels)

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]


BACKENDS = ("DINOV2", "CLIP", "SAM", "NONE")
# fixed input sizes; DINOv2 only needs dims to be patch multiples
BACKEND_TARGETS = {"CLIP": 224, "SAM": 1024, "DINOV2": None, "NONE": None}


@dataclass(frozen=True)
class PreprocessSpec:
    """Which backend the image is being prepared for, and its size policy."""

    backend: str
    patch_size: int = 14
    target_size: int | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.patch_size < 1:
            raise ValueError("patch_size must be positive")
        expected = BACKEND_TARGETS[self.backend]
        target = self.target_size if self.target_size is not None else expected
        if expected is not None and target != expected:
            raise ValueError(f"{self.backend} requires target size {expected}")
        object.__setattr__(self, "target_size", target)


def _plane(img):
    if isinstance(img, GrayImage):
        return img.pixels
    if isinstance(img, PhaseMap):
        return img.labels
    raise TypeError(f"expected GrayImage or PhaseMap, got {type(img).__name__}")


def _rebuild(img, plane):
    return PhaseMap(plane) if isinstance(img, PhaseMap) else GrayImage(plane)


def extract_sections(volume: Volume3D, mode: str = "center", indices=None):
    """Three orthogonal planar slices of a volume (normal to x, y, z).

    mode "center" slices at index floor(n/2) on each axis; mode "index"
    uses the caller-supplied (ix, iy, iz).
    """
    nx, ny, nz = volume.dims
    if mode == "center":
        ix, iy, iz = nx // 2, ny // 2, nz // 2
    elif mode == "index":
        if indices is None:
            raise ValueError("mode 'index' requires explicit indices")
        ix, iy, iz = indices
        if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
            raise ValueError(f"section index out of range for dims {volume.dims}")
    else:
        raise ValueError(f"unknown section mode {mode!r}")
    v = volume.voxels
    return (
        PhaseMap(v[ix, :, :]),  # rows=y, cols=z
        PhaseMap(v[:, iy, :]),  # rows=x, cols=z
        PhaseMap(v[:, :, iz]),  # rows=x, cols=y
    )


def crop_to_patch_multiple(img, patch: int):
    """Crop to the largest width/height multiples of `patch`, keeping the top-left."""
    plane = _plane(img)
    h, w = plane.shape
    if patch < 1:
        raise ValueError("patch size must be positive")
    if w < patch or h < patch:
        raise ValueError(f"image {w}x{h} smaller than one {patch}-pixel patch")
    return _rebuild(img, plane[: (h // patch) * patch, : (w // patch) * patch])


def replicate_upsample(phase_map: PhaseMap, k: int) -> PhaseMap:
    """Split every pixel into a k x k block carrying the same label."""
    if k < 1:
        raise ValueError("upsampling factor must be >= 1")
    labels = np.repeat(np.repeat(phase_map.labels, k, axis=0), k, axis=1)
    return PhaseMap(labels)


def crop_top_left(img, width: int, height: int):
    plane = _plane(img)
    h, w = plane.shape
    if width > w or height > h:
        raise ValueError(f"requested crop {width}x{height} exceeds source {w}x{h}")
    if width < 1 or height < 1:
        raise ValueError("crop size must be positive")
    return _rebuild(img, plane[:height, :width])


def crop_largest_square_multiple(img, patch: int):
    """Crop to the largest top-left square whose side is a multiple of `patch`."""
    plane = _plane(img)
    h, w = plane.shape
    if min(w, h) < patch:
        raise ValueError(f"image {w}x{h} smaller than one {patch}-pixel patch")
    side = (min(w, h) // patch) * patch
    return _rebuild(img, plane[:side, :side])


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centers: src = (i + 0.5) * n_in/n_out - 0.5, clamped to the grid
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    t = src - lo
    return lo, hi, t


def bilinear_resize(img, out_w: int, out_h: int):
    """Bilinear resize with half-pixel sampling and no antialias filter.

    Accepts GrayImage or RgbImage (resized per channel). Output values are
    convex combinations of inputs, so the range never grows.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dims must be positive")
    if isinstance(img, RgbImage):
        planes = [bilinear_resize(GrayImage(c), out_w, out_h).pixels for c in img.channels]
        return RgbImage(np.stack(planes))
    plane = _plane(img)
    if isinstance(img, PhaseMap):
        raise TypeError("bilinear_resize expects gray or rgb input, not a phase map")
    h, w = plane.shape
    ylo, yhi, ty = _bilinear_axis(h, out_h)
    xlo, xhi, tx = _bilinear_axis(w, out_w)
    rows = plane[ylo, :] * (1.0 - ty)[:, None] + plane[yhi, :] * ty[:, None]
    out = rows[:, xlo] * (1.0 - tx)[None, :] + rows[:, xhi] * tx[None, :]
    return GrayImage(np.clip(out, 0.0, 1.0))


def to_rgb(img) -> RgbImage:
    """Expand a grayscale image or phase map into three identical channels."""
    plane = np.asarray(_plane(img), dtype=np.float64)
    return RgbImage(np.stack([plane, plane, plane]))


@dataclass(frozen=True)
class SegmentParams:
    """Denoise + adaptive threshold parameters.

    denoise_h, offset are in 8-bit intensity units (the convention of the
    usual image-processing defaults); they are scaled by 1/255 internally.
    denoise_h = 0 disables denoising.
    """

    denoise_h: float = 10.0
    template: int = 7
    search: int = 21
    block: int = 11
    offset: float = 2.0

    def __post_init__(self):
        if self.denoise_h < 0:
            raise ValueError("denoise strength must be >= 0")
        if self.block % 2 == 0:
            raise ValueError(f"block size must be odd, got {self.block}")
        for name in ("template", "search", "block"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} window must be positive")
        if self.template % 2 == 0 or self.search % 2 == 0:
            raise ValueError("template and search windows must be odd")


def _gaussian_kernel(ksize: int) -> np.ndarray:
    # sigma convention of the common adaptive-threshold implementations
    sigma = 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8
    x = np.arange(ksize) - (ksize - 1) / 2.0
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def _local_gaussian_mean(plane: np.ndarray, block: int) -> np.ndarray:
    kernel = _gaussian_kernel(block)
    out = correlate1d(plane, kernel, axis=0, mode="nearest")
    return correlate1d(out, kernel, axis=1, mode="nearest")


def adaptive_threshold(img: GrayImage, block: int, offset: float) -> PhaseMap:
    """Label 1 where the pixel exceeds the Gaussian-weighted local mean minus offset.

    The local mean uses a block x block Gaussian window with replicated
    borders; `offset` is in 8-bit units.
    """
    if block % 2 == 0:
        raise ValueError(f"block size must be odd, got {block}")
    h, w = img.pixels.shape
    if block > min(h, w):
        raise ValueError(f"block window {block} larger than image {w}x{h}")
    mean = _local_gaussian_mean(img.pixels, block)
    return PhaseMap((img.pixels > mean - offset / 255.0).astype(np.uint8))


def nlm_denoise(img: GrayImage, h: float, template: int = 7, search: int = 21) -> GrayImage:
    """Patchwise non-local means with Gaussian-weighted patch distances.

    Every pixel is replaced by a weighted average of pixels in its search
    window; weights decay as exp(-d2/h^2) with d2 the Gaussian-weighted mean
    squared difference between the two pixels' template patches. `h` is in
    8-bit units. Borders are mirror-padded.
    """
    if h <= 0:
        return img
    hh, ww = img.pixels.shape
    if search > min(hh, ww) or template > min(hh, ww):
        raise ValueError(f"denoise windows ({template}, {search}) larger than image {ww}x{hh}")
    h_f = h / 255.0
    tr = template // 2
    sr = search // 2
    pad = sr + tr
    padded = np.pad(img.pixels, pad, mode="reflect")
    kernel = _gaussian_kernel(template)

    def patch_filter(arr):
        out = correlate1d(arr, kernel, axis=0, mode="constant")
        return correlate1d(out, kernel, axis=1, mode="constant")

    center = padded[sr:sr + hh + 2 * tr, sr:sr + ww + 2 * tr]
    num = np.zeros((hh, ww))
    den = np.zeros((hh, ww))
    for dy in range(-sr, sr + 1):
        for dx in range(-sr, sr + 1):
            shifted = padded[sr + dy:sr + dy + hh + 2 * tr, sr + dx:sr + dx + ww + 2 * tr]
            d2 = patch_filter((center - shifted) ** 2)[tr:tr + hh, tr:tr + ww]
            wgt = np.exp(-d2 / (h_f * h_f))
            num += wgt * shifted[tr:tr + hh, tr:tr + ww]
            den += wgt
    return GrayImage(np.clip(num / den, 0.0, 1.0))


def segment(img: GrayImage, params: SegmentParams = SegmentParams()) -> PhaseMap:
    """Denoise, adaptively threshold, and normalize label polarity.

    Polarity is normalized so label 1 marks the minority phase (ties keep
    the thresholded labels), making downstream statistics independent of
    whether precipitates image dark or light.
    """
    denoised = nlm_denoise(img, params.denoise_h, params.template, params.search)
    phases = adaptive_threshold(denoised, params.block, params.offset)
    ones = int(phases.labels.sum())
    if ones * 2 > phases.labels.size:
        return PhaseMap(1 - phases.labels)
    return phases


def preprocess_for_backend(img, spec: PreprocessSpec):
    """Apply a backend's full size policy and RGB conversion in one call.

    Binary maps are replication-upsampled then cropped (no interpolation);
    grayscale images are cropped to the largest patch-multiple square and
    bilinearly resized. Backend NONE returns the input unchanged.
    """
    if spec.backend == "NONE":
        return img
    if spec.backend == "DINOV2":
        return to_rgb(crop_to_patch_multiple(img, spec.patch_size))
    target = spec.target_size
    if isinstance(img, PhaseMap):
        side = min(img.width, img.height)
        k = math.ceil(target / side)
        up = replicate_upsample(img, k)
        return to_rgb(crop_top_left(up, target, target))
    square = crop_largest_square_multiple(img, spec.patch_size)
    return to_rgb(bilinear_resize(square, target, target))


def load_gray_image(path) -> GrayImage:
    """Read a PNG or PGM image as grayscale in [0, 1] (color inputs are channel-averaged)."""
    with Image.open(Path(path)) as im:
        if im.mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode in ("L", "P", "1"):
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64).mean(axis=2) / 255.0
    return GrayImage(np.clip(arr, 0.0, 1.0))


def save_gray_image(img: GrayImage, path) -> None:
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path))


def save_phase_map(phase_map: PhaseMap, path) -> None:
    Image.fromarray(phase_map.labels * np.uint8(255), mode="L").save(Path(path))


def save_rgb_image(img: RgbImage, path) -> None:
    data = np.round(np.moveaxis(img.channels, 0, 2) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(Path(path))


def phase_map_from_gray(img: GrayImage, strict: bool = True) -> PhaseMap:
    """Reinterpret an already-binary grayscale image as a phase map."""
    pixels = img.pixels
    if strict and not np.isin(pixels, (0.0, 1.0)).all():
        raise ValueError("image is not binary; run segment() first")
    return PhaseMap((pixels > 0.5).astype(np.uint8))
