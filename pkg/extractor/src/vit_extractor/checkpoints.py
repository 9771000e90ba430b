"""Local checkpoint loading with registry verification.

Checkpoints live in a directory named by the VIT_EXTRACTOR_CHECKPOINTS
environment variable (or an explicit --checkpoints path), one file per
registry name. No network access, ever. Every load re-checks the file's
config against the committed registry so the feature-length contract
cannot drift.

Files are torch archives holding {"format", "config", "state_dict"}.
`create_test_checkpoint` writes a shrunken (few blocks, narrow MLP) but
contract-identical model with seeded random weights, which is what the
test suite runs against.
"""

import os
from pathlib import Path

import torch

from .registry import BackboneSpec, backbone
from .vit import VisionTransformer, VitConfig

__all__ = [
    "CHECKPOINT_ENV",
    "CheckpointError",
    "checkpoint_path",
    "checkpoint_root",
    "load_model",
    "create_test_checkpoint",
]

CHECKPOINT_ENV = "VIT_EXTRACTOR_CHECKPOINTS"
FORMAT_TAG = "vit-extractor/1"


class CheckpointError(Exception):
    pass


def checkpoint_root(root=None) -> Path:
    if root is not None:
        return Path(root)
    env = os.environ.get(CHECKPOINT_ENV)
    if not env:
        raise CheckpointError(
            f"no checkpoint directory: set {CHECKPOINT_ENV} or pass "
            f"--checkpoints")
    return Path(env)


def checkpoint_path(name: str, root=None) -> Path:
    return checkpoint_root(root) / f"{name}.pt"


def _validate(spec: BackboneSpec, config: VitConfig) -> None:
    if config.family != spec.family:
        raise CheckpointError(
            f"{spec.name}: checkpoint family {config.family!r} does not "
            f"match the registry ({spec.family!r})")
    if config.patch_size != spec.patch_size:
        raise CheckpointError(
            f"{spec.name}: checkpoint patch size {config.patch_size} does "
            f"not match the registry ({spec.patch_size})")
    if config.feature_length != spec.feature_length:
        raise CheckpointError(
            f"{spec.name}: checkpoint feature length {config.feature_length} "
            f"does not match the registry ({spec.feature_length})")


def load_model(name: str, root=None) -> VisionTransformer:
    """Build the frozen model for a registry name from its local file."""
    spec = backbone(name)
    path = checkpoint_path(name, root)
    if not path.exists():
        raise CheckpointError(f"{spec.name}: no checkpoint at {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{path} is not a {FORMAT_TAG} checkpoint")
    config = VitConfig(**payload["config"])
    _validate(spec, config)
    model = VisionTransformer(config)
    model.load_state_dict(payload["state_dict"], strict=True)
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


def create_test_checkpoint(name: str, root, depth: int = 1,
                           mlp_ratio: float = 1.0, image_size: int = None,
                           pos_grid: int = None, seed: int = 0) -> Path:
    """Write a small seeded checkpoint that honors the registry contract.

    Width, heads, patch size, and projection match the registry (so the
    exported feature length is the real one); depth and MLP width shrink
    so tests stay fast. Fixed-input families may override image_size to
    keep the token count down.
    """
    spec = backbone(name)
    if image_size is None:
        image_size = spec.image_size
    if pos_grid is None:
        pos_grid = 16 if spec.image_size is None else image_size // spec.patch_size
    config = VitConfig(family=spec.family, width=spec.width, depth=depth,
                       heads=spec.heads, patch_size=spec.patch_size,
                       mlp_ratio=mlp_ratio, proj_dim=spec.proj_dim,
                       image_size=image_size, pos_grid=pos_grid)
    model = VisionTransformer(config)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for param in model.parameters():
            param.copy_(torch.randn(param.shape, generator=gen) * 0.02)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"{name}.pt"
    torch.save({"format": FORMAT_TAG, "config": config.to_dict(),
                "state_dict": model.state_dict()}, path)
    return path
