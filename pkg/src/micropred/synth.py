"""Synthetic two-phase volumes with a planted structure-property law.

Volumes are thresholded Gaussian random fields (periodic smoothing, so the
statistics treat the box as a torus). The planted property couples volume
fraction with per-axis interface densities using deliberately unequal
direction weights; recovering it accurately requires features that keep the
three section orientations distinguishable.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataio import Volume3D, volume_fraction

__all__ = [
    "gen_volume",
    "surface_density",
    "planted_property",
    "gen_ensemble",
    "PLANTED_WEIGHTS",
    "PLANTED_E0",
    "PLANTED_E1",
]

# direction weights for the planted law; chosen so no fixed mixture of
# row/column statistics of the three orthogonal center sections can express
# them (the weight vector sits far outside the span of the pooled row and
# column mixes, whose orthogonal complement is the (1, -2, 1) direction)
PLANTED_WEIGHTS = (0.50, 0.05, 0.45)
PLANTED_E0 = 10.0
PLANTED_E1 = 60.0


def gen_volume(dims, vf_target: float, corr_len, seed) -> Volume3D:
    """Threshold a periodically smoothed Gaussian field at the quantile that
    hits `vf_target` (exact to within one voxel in N). `corr_len` is a
    smoothing length in voxels, scalar or per-axis (nx, ny, nz order).
    """
    nx, ny, nz = (int(d) for d in dims)
    if not 0.0 < vf_target < 1.0:
        raise ValueError("volume fraction target must lie strictly in (0, 1)")
    sigma = np.broadcast_to(np.asarray(corr_len, dtype=np.float64), (3,))
    if np.any(sigma < 0):
        raise ValueError("correlation length must be >= 0")
    rng = np.random.default_rng(seed)
    field = rng.standard_normal((nx, ny, nz))
    if np.any(sigma > 0):
        field = gaussian_filter(field, sigma=tuple(sigma), mode="wrap")
    threshold = np.quantile(field, 1.0 - vf_target)
    labels = (field >= threshold).astype(np.uint8)
    return Volume3D((nx, ny, nz), labels)


def surface_density(volume: Volume3D) -> tuple:
    """Fraction of periodic nearest-neighbor voxel pairs along each axis
    whose labels differ: (s_x, s_y, s_z).
    """
    v = volume.voxels
    return tuple(float(np.mean(v != np.roll(v, 1, axis=ax))) for ax in range(3))


def planted_property(volume: Volume3D) -> float:
    """Closed-form target: E0 + (E1 - E0) * vf * (1 - w . s) with s the
    per-axis surface densities and w = PLANTED_WEIGHTS.
    """
    vf = volume_fraction(volume)
    s = surface_density(volume)
    w = PLANTED_WEIGHTS
    return float(PLANTED_E0 + (PLANTED_E1 - PLANTED_E0) * vf
                 * (1.0 - w[0] * s[0] - w[1] * s[1] - w[2] * s[2]))


def gen_ensemble(count: int, dims, vf_range=(0.25, 0.75),
                 corr_len_range=(1.0, 4.0), seed=0, anisotropic: bool = True):
    """Deterministic ensemble: yields (sample_id, volume, target) triples.

    Per-sample volume fractions and (optionally per-axis) correlation
    lengths are drawn uniformly from the given ranges using a master seed,
    so the same seed always reproduces the same ensemble.
    """
    if count < 1:
        raise ValueError("count must be positive")
    lo_vf, hi_vf = vf_range
    lo_cl, hi_cl = corr_len_range
    if not (0.0 < lo_vf <= hi_vf < 1.0):
        raise ValueError("volume fraction range must lie strictly in (0, 1)")
    master = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        vf = float(master.uniform(lo_vf, hi_vf))
        if anisotropic:
            corr = tuple(float(c) for c in master.uniform(lo_cl, hi_cl, size=3))
        else:
            corr = float(master.uniform(lo_cl, hi_cl))
        vol = gen_volume(dims, vf, corr, seed=master.integers(0, 2 ** 63))
        out.append((f"s{idx:05d}", vol, planted_property(vol)))
    return out
