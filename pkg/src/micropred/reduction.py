"""Principal component analysis for feature-set dimensionality reduction.

Computed by singular value decomposition of the centered sample matrix
(never the d x d covariance): feature dims can far exceed sample counts, so
the SVD route costs O(n^2 d) instead of O(d^2). Components carry a
deterministic sign: the largest-magnitude entry of each is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureSet

__all__ = [
    "PCAModel",
    "fit_pca",
    "transform",
    "inverse_transform",
    "scree",
    "pc_volume_fraction_correlation",
]


@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing
    explained_variance_ratio: np.ndarray

    def __post_init__(self):
        for name in ("mean", "components", "explained_variance", "explained_variance_ratio"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.components.ndim != 2:
            raise ValueError("components must be a k x d matrix")
        if np.any(np.diff(self.explained_variance) > 1e-10):
            raise ValueError("explained_variance must be non-increasing")

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def fit_pca(fset: FeatureSet, k: int) -> PCAModel:
    """Top-k principal directions of the centered feature matrix.

    Requires k <= min(n_samples - 1, d). Rank-deficient data is allowed;
    trailing explained variances may be zero. Variances use divisor n-1.
    """
    x = fset.matrix
    n, d = x.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 samples")
    if not (1 <= k <= min(n - 1, d)):
        raise ValueError(f"k={k} out of range for {n} samples of dim {d}")
    mean = x.mean(axis=0)
    centered = x - mean
    # thin SVD: centered = U @ diag(s) @ vt
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k]
    variances = (s ** 2) / (n - 1)
    total = variances.sum()
    # deterministic sign: largest-magnitude entry of each component positive
    signs = np.sign(components[np.arange(k), np.argmax(np.abs(components), axis=1)])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]
    ratio = variances[:k] / total if total > 0 else np.zeros(k)
    return PCAModel(mean, components, variances[:k], ratio)


def transform(model: PCAModel, fset: FeatureSet, k: int | None = None) -> FeatureSet:
    """Project features onto the leading k principal directions (scores)."""
    if fset.dim != model.dim:
        raise ValueError(f"dimension mismatch: model {model.dim}, features {fset.dim}")
    k = model.k if k is None else k
    if not (1 <= k <= model.k):
        raise ValueError(f"k={k} out of range for a {model.k}-component model")
    scores = (fset.matrix - model.mean) @ model.components[:k].T
    return fset.with_matrix(scores, f"{fset.extractor_id}/pca{k}")


def inverse_transform(model: PCAModel, scores: FeatureSet) -> FeatureSet:
    k = scores.dim
    if k > model.k:
        raise ValueError("more score dims than model components")
    back = scores.matrix @ model.components[:k] + model.mean
    return scores.with_matrix(back, scores.extractor_id + "/inv")


def scree(model: PCAModel, n: int | None = None):
    """Per-component and cumulative explained-variance ratios, 1-indexed."""
    n = model.k if n is None else n
    if n > model.k:
        raise ValueError(f"requested {n} entries from a {model.k}-component model")
    out = []
    cumulative = 0.0
    for i in range(n):
        ratio = float(model.explained_variance_ratio[i])
        cumulative += ratio
        out.append((i + 1, ratio, cumulative))
    return out


def pc_volume_fraction_correlation(scores: FeatureSet, vf) -> float:
    """Pearson correlation between the first principal score and volume fraction.

    `vf` maps sample_id -> volume fraction (or is a sequence aligned with
    the score set's id order).
    """
    if hasattr(vf, "keys"):
        y = np.array([vf[sid] for sid in scores.ids], dtype=np.float64)
    else:
        y = np.asarray(vf, dtype=np.float64)
        if y.size != len(scores):
            raise ValueError("volume fraction count does not match sample count")
    pc1 = scores.matrix[:, 0]
    if np.std(pc1) == 0 or np.std(y) == 0:
        raise ValueError("zero variance series; correlation undefined")
    return float(np.corrcoef(pc1, y)[0, 1])
