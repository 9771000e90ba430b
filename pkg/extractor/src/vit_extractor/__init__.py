"""Frozen vision-transformer feature extraction to MPFV1 files."""

from .checkpoints import (
    CHECKPOINT_ENV,
    CheckpointError,
    checkpoint_path,
    checkpoint_root,
    create_test_checkpoint,
    load_model,
)
from .extract import extract_vectors, list_images, run_extraction
from .mpfv import read_features, write_features
from .parity import PARITY_TOLERANCE, preprocess_parity
from .preprocess import (
    bilinear_resize,
    crop_largest_square_multiple,
    crop_to_patch_multiple,
    crop_top_left,
    load_gray,
    normalize,
    prepare_image,
    replicate_upsample,
    shape_for_backbone,
)
from .registry import NORMALIZATIONS, REGISTRY, BackboneSpec, backbone
from .vit import VisionTransformer, VitConfig

__version__ = "0.1.0"

__all__ = [
    "CHECKPOINT_ENV",
    "CheckpointError",
    "NORMALIZATIONS",
    "PARITY_TOLERANCE",
    "REGISTRY",
    "BackboneSpec",
    "VisionTransformer",
    "VitConfig",
    "backbone",
    "bilinear_resize",
    "checkpoint_path",
    "checkpoint_root",
    "create_test_checkpoint",
    "crop_largest_square_multiple",
    "crop_to_patch_multiple",
    "crop_top_left",
    "extract_vectors",
    "list_images",
    "load_gray",
    "load_model",
    "normalize",
    "prepare_image",
    "preprocess_parity",
    "read_features",
    "replicate_upsample",
    "run_extraction",
    "shape_for_backbone",
    "write_features",
]
