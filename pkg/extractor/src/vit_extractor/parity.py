"""Cross-component preprocessing contract check.

The regression pipeline owns the image-shaping math; this module proves
the extractor reproduces it without importing it. A fixture directory
holds input images next to expected post-shaping planes:

    <stem>.png                 input image
    <stem>.<backbone>.npy      expected grayscale plane after shaping

`preprocess_parity` replays every expectation through this package's
shaping and reports the worst per-pixel deviation, raising if any case
drifts beyond the tolerance.
"""

from pathlib import Path

import numpy as np

from .preprocess import load_gray, shape_for_backbone
from .registry import backbone

__all__ = ["PARITY_TOLERANCE", "preprocess_parity"]

PARITY_TOLERANCE = 1e-6


def preprocess_parity(fixture_dir, tolerance: float = PARITY_TOLERANCE) -> dict:
    fixture_dir = Path(fixture_dir)
    expectations = sorted(fixture_dir.glob("*.npy"))
    if not expectations:
        raise ValueError(f"no parity fixtures (*.npy) in {fixture_dir}")
    cases, failures = [], []
    for exp_path in expectations:
        stem, _, name = exp_path.stem.rpartition(".")
        if not stem:
            raise ValueError(f"fixture {exp_path.name} is not <stem>.<backbone>.npy")
        image = fixture_dir / f"{stem}.png"
        if not image.exists():
            raise ValueError(f"fixture {exp_path.name} has no input {image.name}")
        expected = np.load(exp_path)
        got = shape_for_backbone(load_gray(image), backbone(name))
        if got.shape != expected.shape:
            failures.append(f"{exp_path.name}: shape {got.shape} != {expected.shape}")
            continue
        diff = float(np.max(np.abs(got - expected)))
        cases.append({"fixture": exp_path.name, "shape": got.shape,
                      "max_abs_diff": diff})
        if diff > tolerance:
            failures.append(f"{exp_path.name}: max abs diff {diff:.3e}")
    if failures:
        raise ValueError("preprocessing parity violated: " + "; ".join(failures))
    return {
        "cases": cases,
        "worst": max(c["max_abs_diff"] for c in cases),
        "tolerance": tolerance,
    }
