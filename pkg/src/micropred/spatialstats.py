"""Two-point spatial correlations of phase maps via FFT.

A correlation map stores, for every shift r, the probability that a pixel
pair separated by r lands in the requested phase(s). Zero shift sits at the
center of the map (row h//2, column w//2), so center-cropping is a plain
window. Periodic maps share the input dims; non-periodic maps span all
shifts, (2h-1) x (2w-1), each normalized by its count of valid pixel pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureVector
from .preprocess import PhaseMap

__all__ = [
    "CorrelationMap",
    "two_point",
    "center_crop_map",
    "vectorize",
]

KINDS = ("auto", "cross")
BOUNDARIES = ("periodic", "nonperiodic")


@dataclass(frozen=True)
class CorrelationMap:
    """values[center + r] = P(pixel x in phases[0] and pixel x+r in phases[1])."""

    values: np.ndarray  # shape (height, width), probabilities in [0, 1]
    kind: str
    phases: tuple
    boundary: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("correlation map must be a non-empty 2D array")
        if values.min() < -1e-10 or values.max() > 1.0 + 1e-10:
            raise ValueError("correlation values must be probabilities in [0, 1]")
        if self.kind not in KINDS:
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary treatment {self.boundary!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "phases", tuple(int(p) for p in self.phases))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def center(self) -> tuple:
        """(row, col) index of the zero-shift entry."""
        return (self.values.shape[0] // 2, self.values.shape[1] // 2)


def _indicators(phase_map: PhaseMap, kind: str, phases):
    labels = phase_map.labels
    if kind == "auto":
        phases = (int(phases[0]),) if phases else (1,)
        a = (labels == phases[0]).astype(np.float64)
        return a, a, (phases[0], phases[0])
    if kind == "cross":
        pa, pb = (int(phases[0]), int(phases[1])) if phases else (0, 1)
        if pa == pb:
            raise ValueError("cross-correlation needs two distinct phases")
        return (labels == pa).astype(np.float64), (labels == pb).astype(np.float64), (pa, pb)
    raise ValueError(f"unknown correlation kind {kind!r}")


def two_point(phase_map: PhaseMap, kind: str = "auto", boundary: str = "periodic",
              phases=()) -> CorrelationMap:
    """Two-point correlation of a binary map for one phase (auto) or a phase pair (cross).

    periodic:     S(r) = IDFT(DFT(I_A) * conj(DFT(I_B))) / N over circular
                  shifts; output dims equal the input dims.
    nonperiodic:  the same product on zero-padded transforms, divided per
                  shift by the number of pixel pairs actually inside the
                  image; output covers all (2h-1) x (2w-1) shifts.

    Auto-correlation defaults to phase 1; cross to the ordered pair (0, 1).
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    a, b, phases = _indicators(phase_map, kind, phases)
    h, w = a.shape
    # irfft2(rfft2(u) * conj(rfft2(v)))[r] = sum_x u(x+r) v(x); with u = b
    # and v = a this yields sum_x a(x) b(x+r): phase a at the reference
    # pixel, phase b at the displaced one
    if boundary == "periodic":
        spec = np.fft.rfft2(b) * np.conj(np.fft.rfft2(a))
        corr = np.fft.irfft2(spec, s=(h, w)) / (h * w)
        values = np.fft.fftshift(corr)
    else:
        out_h, out_w = 2 * h - 1, 2 * w - 1
        spec = np.fft.rfft2(b, s=(out_h, out_w)) * np.conj(np.fft.rfft2(a, s=(out_h, out_w)))
        corr = np.fft.irfft2(spec, s=(out_h, out_w))
        # valid pair count for shift (dy, dx): (h - |dy|) * (w - |dx|)
        dy = np.minimum(np.arange(out_h), out_h - np.arange(out_h))
        dx = np.minimum(np.arange(out_w), out_w - np.arange(out_w))
        counts = np.outer(h - dy, w - dx)
        values = np.fft.fftshift(corr / counts)
    return CorrelationMap(np.clip(values, 0.0, 1.0), kind, phases, boundary)


def center_crop_map(corr: CorrelationMap, side: int) -> CorrelationMap:
    """Odd-sided window around the zero-shift entry; zero shift stays centered."""
    if side % 2 == 0:
        raise ValueError(f"crop side must be odd, got {side}")
    if side > corr.height or side > corr.width:
        raise ValueError(f"crop side {side} exceeds map dims {corr.width}x{corr.height}")
    cy, cx = corr.center
    r = side // 2
    window = corr.values[cy - r:cy + r + 1, cx - r:cx + r + 1]
    return CorrelationMap(window, corr.kind, corr.phases, corr.boundary)


def vectorize(corr: CorrelationMap, sample_id: str = "", extractor_id: str | None = None) -> FeatureVector:
    """Row-major flattening of a correlation map into a length w*h feature vector."""
    eid = extractor_id or f"twopoint/{corr.kind}/{corr.boundary}"
    return FeatureVector(sample_id, corr.values.reshape(-1), eid)
