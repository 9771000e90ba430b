"""Per-sample feature vectors: aggregation, composition augmentation, standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureVector",
    "FeatureSet",
    "Standardizer",
    "aggregate",
    "append_composition",
    "fit_standardizer",
    "apply_standardizer",
    "invert_standardizer",
    "sam_patch_pool",
]


@dataclass(frozen=True)
class FeatureVector:
    """A single sample's numeric descriptor with extractor provenance."""

    sample_id: str
    values: np.ndarray
    extractor_id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("feature vector must be a non-empty 1D array")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite value in feature vector {self.sample_id!r}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


class FeatureSet:
    """Keyed collection of equal-length feature vectors sharing one extractor.

    Immutable after construction; the backing matrix is marked read-only so
    sets can be shared across threads.
    """

    def __init__(self, ids, matrix, extractor_id: str):
        ids = tuple(str(i) for i in ids)
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2:
            raise ValueError("feature matrix must be 2D (samples x dims)")
        if len(ids) != matrix.shape[0]:
            raise ValueError("id count does not match matrix rows")
        if matrix.shape[1] == 0:
            raise ValueError("feature dimension must be positive")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sample_id in feature set")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("non-finite value in feature set")
        matrix.setflags(write=False)
        self.ids = ids
        self.matrix = matrix
        self.extractor_id = str(extractor_id)
        self._index = {sid: row for row, sid in enumerate(ids)}

    @classmethod
    def from_vectors(cls, vectors) -> "FeatureSet":
        vectors = list(vectors)
        if not vectors:
            raise ValueError("empty vector list")
        dim = len(vectors[0])
        eid = vectors[0].extractor_id
        for v in vectors:
            if len(v) != dim:
                raise ValueError("inconsistent vector lengths")
            if v.extractor_id != eid:
                raise ValueError("mixed extractor_id in feature set")
        return cls([v.sample_id for v in vectors], np.stack([v.values for v in vectors]), eid)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._index

    def vector(self, sample_id: str) -> FeatureVector:
        row = self._index[sample_id]
        return FeatureVector(sample_id, self.matrix[row], self.extractor_id)

    def subset(self, ids) -> "FeatureSet":
        """New set restricted to `ids`, in the given order."""
        rows = [self._index[i] for i in ids]
        return FeatureSet(ids, self.matrix[rows], self.extractor_id)

    def with_matrix(self, matrix, extractor_id=None) -> "FeatureSet":
        return FeatureSet(self.ids, matrix, extractor_id or self.extractor_id)


def aggregate(sections, method: str) -> FeatureVector:
    """Combine one sample's per-section vectors into a single vector.

    method "concat" joins the vectors in the given section order; "mean"
    averages them element-wise (all sections must share one length).
    """
    sections = list(sections)
    if not sections:
        raise ValueError("empty section list")
    eid = sections[0].extractor_id
    sid = sections[0].sample_id
    for v in sections:
        if v.extractor_id != eid:
            raise ValueError("sections come from different extractors")
    if method == "concat":
        values = np.concatenate([v.values for v in sections])
    elif method == "mean":
        dim = len(sections[0])
        if any(len(v) != dim for v in sections):
            raise ValueError("length mismatch under mean aggregation")
        values = np.mean([v.values for v in sections], axis=0)
    else:
        raise ValueError(f"unknown aggregation method {method!r}")
    return FeatureVector(sid, values, f"{eid}/{method}")


def aggregate_sets(section_sets, method: str) -> FeatureSet:
    """Aggregate across parallel per-section FeatureSets (same ids in each)."""
    section_sets = list(section_sets)
    if not section_sets:
        raise ValueError("empty section list")
    ids = section_sets[0].ids
    for s in section_sets[1:]:
        if set(s.ids) != set(ids):
            raise ValueError("section sets do not cover the same sample_ids")
    vectors = [
        aggregate([s.vector(sid) for s in section_sets], method)
        for sid in ids
    ]
    return FeatureSet.from_vectors(vectors)


def append_composition(f: FeatureVector, comp) -> FeatureVector:
    """Append a 22-element composition to the tail of a microstructure vector."""
    values = np.asarray(comp.values if hasattr(comp, "values") else comp, dtype=np.float64)
    if values.shape != (22,):
        raise ValueError(f"composition arity: expected 22 elements, got {values.size}")
    return FeatureVector(f.sample_id, np.concatenate([f.values, values]),
                         f"{f.extractor_id}+comp")


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension location/scale transform fitted on a training set.

    Uses population statistics (divisor N). Dimensions with zero spread are
    mapped to 0 instead of dividing by zero.
    """

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=np.float64))
        if np.any(self.stds < 0):
            raise ValueError("negative standard deviation")


def fit_standardizer(fset: FeatureSet) -> Standardizer:
    if len(fset) < 2:
        raise ValueError("standardizer needs at least 2 samples")
    means = fset.matrix.mean(axis=0)
    stds = fset.matrix.std(axis=0)  # population std, divisor N
    return Standardizer(means, stds)


def apply_standardizer(s: Standardizer, fset: FeatureSet) -> FeatureSet:
    if fset.dim != s.means.size:
        raise ValueError("dimension mismatch between standardizer and features")
    safe = np.where(s.stds > 0, s.stds, 1.0)
    out = (fset.matrix - s.means) / safe
    out[:, s.stds == 0] = 0.0
    return fset.with_matrix(out, f"{fset.extractor_id}/std")


def invert_standardizer(s: Standardizer, fset: FeatureSet) -> FeatureSet:
    """Undo apply_standardizer on non-constant dims (constant dims restore the mean)."""
    out = fset.matrix * s.stds + s.means
    return fset.with_matrix(out)


def sam_patch_pool(patch_tokens) -> np.ndarray:
    """Element-wise mean over patch-level tokens (n_patches x d) -> length-d vector.

    Fallback pooling for extractors that ship raw patch tokens instead of an
    image-level summary token.
    """
    tokens = np.asarray(patch_tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValueError("patch tokens must form an n_patches x d matrix")
    return tokens.mean(axis=0)
