"""Pinned backbone registry.

Feature lengths and model shapes are committed here (pinned from the
checkpoints' metadata) and re-verified every time a checkpoint loads, so
a swapped or truncated file cannot silently change the feature contract.
"""

from dataclasses import dataclass

__all__ = ["BackboneSpec", "REGISTRY", "NORMALIZATIONS", "backbone"]

# per-channel (mean, std) applied to RGB values in [0, 1]
NORMALIZATIONS = {
    "clip": ((0.48145466, 0.4578275, 0.40821073),
             (0.26862954, 0.26130258, 0.27577711)),
    "imagenet": ((0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
}


@dataclass(frozen=True)
class BackboneSpec:
    name: str             # registry / CLI identifier, e.g. "clip-b32"
    family: str           # "clip", "dinov2", or "sam"
    size_code: str        # "b32", "l14", "h", ...
    patch_size: int       # token tile the transformer consumes
    crop_patch: int       # multiple the preprocessing crops to
    feature_length: int   # exported vector length, verified at load
    width: int            # transformer hidden width
    depth: int            # published block count (test checkpoints shrink this)
    heads: int
    proj_dim: int | None  # output projection (CLIP); None = raw hidden width
    image_size: int | None  # fixed square input, None = free patch multiples
    normalization: str    # key into NORMALIZATIONS

    def __post_init__(self):
        if self.patch_size not in (14, 16, 32):
            raise ValueError(f"unsupported patch size {self.patch_size}")
        expected = self.proj_dim if self.proj_dim is not None else self.width
        if self.feature_length != expected:
            raise ValueError(
                f"{self.name}: feature length {self.feature_length} does not "
                f"match the model head ({expected})")

    @property
    def input_policy(self) -> str:
        if self.image_size is not None:
            return f"fixed {self.image_size}"
        return f"multiples of {self.patch_size}"

    @property
    def extractor_id(self) -> str:
        return f"{self.family}/{self.size_code}+norm={self.normalization}"


REGISTRY = {
    "clip-b32": BackboneSpec("clip-b32", "clip", "b32", 32, 32, 512,
                             768, 12, 12, 512, 224, "clip"),
    "clip-b16": BackboneSpec("clip-b16", "clip", "b16", 16, 16, 512,
                             768, 12, 12, 512, 224, "clip"),
    "clip-l14": BackboneSpec("clip-l14", "clip", "l14", 14, 14, 768,
                             1024, 24, 16, 768, 224, "clip"),
    "dinov2-s14": BackboneSpec("dinov2-s14", "dinov2", "s14", 14, 14, 384,
                               384, 12, 6, None, None, "imagenet"),
    "dinov2-b14": BackboneSpec("dinov2-b14", "dinov2", "b14", 14, 14, 768,
                               768, 12, 12, None, None, "imagenet"),
    "dinov2-l14": BackboneSpec("dinov2-l14", "dinov2", "l14", 14, 14, 1024,
                               1024, 24, 16, None, None, "imagenet"),
    "dinov2-g14": BackboneSpec("dinov2-g14", "dinov2", "g14", 14, 14, 1536,
                               1536, 40, 24, None, None, "imagenet"),
    # SAM "huge": tokens are 16px tiles, but the crop step uses 14 so the
    # shaping matches the pipeline that feeds every backbone the same way;
    # the input is resized to the fixed square afterwards either way
    "sam-h": BackboneSpec("sam-h", "sam", "h", 16, 14, 1280,
                          1280, 32, 16, None, 1024, "imagenet"),
}


def backbone(name: str) -> BackboneSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise KeyError(f"unknown backbone {name!r}; known: {known}") from None
