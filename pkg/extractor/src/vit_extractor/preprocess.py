"""Image shaping that mirrors the feature pipeline's conventions exactly.

The regression pipeline prepares images before any backbone sees them;
this module reproduces that math (top-left patch-multiple crops,
half-pixel bilinear resizing, replicate upsampling for binary maps) so
features extracted here line up with features computed there. The parity
tests pin the agreement to 1e-6 per pixel.
"""

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .registry import NORMALIZATIONS, BackboneSpec

__all__ = [
    "load_gray",
    "crop_to_patch_multiple",
    "crop_largest_square_multiple",
    "crop_top_left",
    "replicate_upsample",
    "bilinear_resize",
    "shape_for_backbone",
    "normalize",
    "prepare_image",
]


def load_gray(path) -> np.ndarray:
    """PNG/PGM file to a float64 grayscale array in [0, 1].

    Color inputs are channel-averaged, 16-bit inputs divide by 65535,
    matching the pipeline's loader.
    """
    with Image.open(Path(path)) as im:
        if im.mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode in ("L", "P", "1"):
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64).mean(axis=2) / 255.0
    return np.clip(arr, 0.0, 1.0)


def crop_top_left(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    h, w = arr.shape
    if height > h or width > w:
        raise ValueError(f"cannot crop {h}x{w} to {height}x{width}")
    return arr[:height, :width]


def crop_to_patch_multiple(arr: np.ndarray, patch: int) -> np.ndarray:
    h, w = arr.shape
    nh, nw = (h // patch) * patch, (w // patch) * patch
    if nh == 0 or nw == 0:
        raise ValueError(f"image {h}x{w} is smaller than one {patch}px patch")
    return arr[:nh, :nw]


def crop_largest_square_multiple(arr: np.ndarray, patch: int) -> np.ndarray:
    side = (min(arr.shape) // patch) * patch
    if side == 0:
        raise ValueError(f"image {arr.shape} is smaller than one {patch}px patch")
    return arr[:side, :side]


def replicate_upsample(arr: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("upsample factor must be >= 1")
    return np.repeat(np.repeat(arr, k, axis=0), k, axis=1)


def _axis_resize(arr: np.ndarray, out_len: int, axis: int) -> np.ndarray:
    """Half-pixel-convention linear interpolation along one axis."""
    in_len = arr.shape[axis]
    if out_len < 1:
        raise ValueError("output size must be >= 1")
    src = (np.arange(out_len) + 0.5) * (in_len / out_len) - 0.5
    src = np.clip(src, 0.0, in_len - 1.0)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, in_len - 1)
    frac = src - lo
    moved = np.moveaxis(arr, axis, 0)
    out = moved[lo] * (1.0 - frac)[:, None] + moved[hi] * frac[:, None]
    return np.moveaxis(out, 0, axis)


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    out = _axis_resize(arr, out_h, axis=0)
    return _axis_resize(out, out_w, axis=1)


def _is_binary(arr: np.ndarray) -> bool:
    return bool(np.isin(arr, (0.0, 1.0)).all())


def shape_for_backbone(arr: np.ndarray, spec: BackboneSpec,
                       image_size: int = None) -> np.ndarray:
    """Apply the backbone's size policy to a grayscale array.

    Free-size models crop to a patch multiple. Fixed-size models crop
    the largest patch-multiple square and resize; already-binary maps
    are replicate-upsampled and cropped instead so no interpolated gray
    values appear. `image_size` overrides the registry target (used when
    a checkpoint was built at a reduced size).
    """
    if spec.image_size is None and image_size is None:
        return crop_to_patch_multiple(arr, spec.crop_patch)
    target = image_size if image_size is not None else spec.image_size
    if _is_binary(arr):
        side = min(arr.shape)
        k = math.ceil(target / side)
        return crop_top_left(replicate_upsample(arr, k), target, target)
    square = crop_largest_square_multiple(arr, spec.crop_patch)
    return bilinear_resize(square, target, target)


def normalize(rgb: np.ndarray, spec: BackboneSpec) -> np.ndarray:
    """Standardize (3, h, w) RGB values in [0, 1] with the family's stats."""
    mean, std = NORMALIZATIONS[spec.normalization]
    mean = np.asarray(mean, dtype=np.float64)[:, None, None]
    std = np.asarray(std, dtype=np.float64)[:, None, None]
    return (rgb - mean) / std


def prepare_image(path, spec: BackboneSpec, image_size: int = None) -> np.ndarray:
    """File path to a normalized float32 (3, h, w) array for the forward pass."""
    gray = load_gray(path)
    shaped = shape_for_backbone(gray, spec, image_size)
    rgb = np.repeat(shaped[None, :, :], 3, axis=0)
    return normalize(rgb, spec).astype(np.float32)
