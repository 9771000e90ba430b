"""Minimal vision transformers for frozen feature extraction.

One implementation covers the three families; the config decides the
token layout and the readout:

  clip    class token, ln_pre, post-norm on the class token, projection
  dinov2  class token, free input sizes via position interpolation
  sam     no class token, fixed grid, mean over patch tokens

Weights always run frozen in eval mode; there is no dropout or other
stochastic layer, so outputs are bit-stable for a fixed input.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

__all__ = ["VitConfig", "VisionTransformer"]


@dataclass(frozen=True)
class VitConfig:
    family: str
    width: int
    depth: int
    heads: int
    patch_size: int
    mlp_ratio: float = 4.0
    proj_dim: int | None = None      # clip output projection
    image_size: int | None = None    # fixed square input, None = free
    pos_grid: int = 16               # stored position grid for free-size models

    def __post_init__(self):
        if self.family not in ("clip", "dinov2", "sam"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.width % self.heads:
            raise ValueError("width must divide evenly into heads")
        if self.family == "clip" and self.proj_dim is None:
            raise ValueError("clip models need a projection dim")
        if self.family != "dinov2" and self.image_size is None:
            raise ValueError(f"{self.family} needs a fixed image size")

    @property
    def feature_length(self) -> int:
        return self.proj_dim if self.proj_dim is not None else self.width

    @property
    def grid(self) -> int:
        if self.image_size is None:
            return self.pos_grid
        return self.image_size // self.patch_size

    def to_dict(self) -> dict:
        return {"family": self.family, "width": self.width,
                "depth": self.depth, "heads": self.heads,
                "patch_size": self.patch_size, "mlp_ratio": self.mlp_ratio,
                "proj_dim": self.proj_dim, "image_size": self.image_size,
                "pos_grid": self.pos_grid}


class Attention(nn.Module):
    def __init__(self, width, heads):
        super().__init__()
        self.heads = heads
        self.head_dim = width // heads
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)

    def forward(self, x):
        b, n, w = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, w)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, width, hidden, quick_gelu):
        super().__init__()
        self.fc1 = nn.Linear(width, hidden)
        self.fc2 = nn.Linear(hidden, width)
        self.quick_gelu = quick_gelu

    def forward(self, x):
        x = self.fc1(x)
        # clip checkpoints use the sigmoid approximation of gelu
        x = x * torch.sigmoid(1.702 * x) if self.quick_gelu else F.gelu(x)
        return self.fc2(x)


class Block(nn.Module):
    def __init__(self, width, heads, mlp_ratio, quick_gelu, eps):
        super().__init__()
        self.ln1 = nn.LayerNorm(width, eps=eps)
        self.attn = Attention(width, heads)
        self.ln2 = nn.LayerNorm(width, eps=eps)
        self.mlp = Mlp(width, max(1, int(width * mlp_ratio)), quick_gelu)

    def forward(self, x):
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class VisionTransformer(nn.Module):
    def __init__(self, config: VitConfig):
        super().__init__()
        self.config = config
        w, p = config.width, config.patch_size
        quick_gelu = config.family == "clip"
        eps = 1e-6 if config.family == "dinov2" else 1e-5
        self.embed = nn.Conv2d(3, w, kernel_size=p, stride=p,
                               bias=config.family != "clip")
        n_pos = config.grid * config.grid
        if config.family == "sam":
            self.cls_token = None
            self.pos = nn.Parameter(torch.zeros(1, n_pos, w))
        else:
            self.cls_token = nn.Parameter(torch.zeros(1, 1, w))
            self.pos = nn.Parameter(torch.zeros(1, 1 + n_pos, w))
        self.ln_pre = nn.LayerNorm(w, eps=eps) if config.family == "clip" else None
        self.blocks = nn.ModuleList(
            Block(w, config.heads, config.mlp_ratio, quick_gelu, eps)
            for _ in range(config.depth))
        self.norm = nn.LayerNorm(w, eps=eps)
        if config.proj_dim is not None:
            self.proj = nn.Parameter(torch.zeros(w, config.proj_dim))
        else:
            self.proj = None

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError("expected a (batch, 3, height, width) tensor")
        _, _, h, w = x.shape
        size = self.config.image_size
        if size is not None:
            if (h, w) != (size, size):
                raise ValueError(
                    f"{self.config.family} expects fixed {size}x{size} input, "
                    f"got {h}x{w}")
        else:
            p = self.config.patch_size
            if h < p or w < p or h % p or w % p:
                raise ValueError(
                    f"input {h}x{w} is not a positive multiple of the "
                    f"patch size {p}")

    def _positions(self, gh, gw):
        """Position table for a gh x gw token grid (interpolated if needed)."""
        g = self.config.grid
        if self.config.family == "sam":
            table = self.pos
            cls_pos = None
        else:
            cls_pos, table = self.pos[:, :1], self.pos[:, 1:]
        if (gh, gw) != (g, g):
            table = table.reshape(1, g, g, -1).permute(0, 3, 1, 2)
            table = F.interpolate(table, size=(gh, gw), mode="bicubic",
                                  align_corners=False)
            table = table.permute(0, 2, 3, 1).reshape(1, gh * gw, -1)
        if cls_pos is None:
            return table
        return torch.cat([cls_pos, table], dim=1)

    def forward(self, x):
        self._check_input(x)
        x = self.embed(x)                       # (b, w, gh, gw)
        b, _, gh, gw = x.shape
        x = x.flatten(2).transpose(1, 2)        # (b, n, w)
        if self.cls_token is not None:
            cls = self.cls_token.expand(b, -1, -1)
            x = torch.cat([cls, x], dim=1)
        x = x + self._positions(gh, gw)
        if self.ln_pre is not None:
            x = self.ln_pre(x)
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        if self.config.family == "sam":
            feat = x.mean(dim=1)                # pool the patch tokens
        else:
            feat = x[:, 0]                      # the class token
        if self.proj is not None:
            feat = feat @ self.proj
        return feat
