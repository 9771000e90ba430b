"""Batch feature extraction: image files in, MPFV1 files out.

Images come either from a directory of PNGs (sample id = file stem) or
from a pipeline manifest CSV (sample_id column plus one or more image_N
columns). Manifests with several image columns produce one feature file
per column, named like the pipeline's own per-section outputs, so the
downstream aggregate step consumes them unchanged.
"""

import csv
from pathlib import Path

import numpy as np
import torch

from .checkpoints import load_model
from .mpfv import write_features
from .preprocess import prepare_image
from .registry import backbone
from .vit import VisionTransformer

__all__ = ["extract_vectors", "run_extraction", "list_images"]


def list_images(source):
    """Resolve a directory or manifest into [(column_label, [(id, path)...])].

    A directory (or a manifest with a single image column) yields one
    group labeled "". Multi-image manifests yield one group per column.
    """
    source = Path(source)
    if source.is_dir():
        paths = sorted(p for p in source.iterdir()
                       if p.suffix.lower() in (".png", ".pgm"))
        if not paths:
            raise ValueError(f"no images found in {source}")
        return [("", [(p.stem, p) for p in paths])]
    with open(source, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows or rows[0][0] != "sample_id":
        raise ValueError(f"{source} is neither an image directory nor a manifest")
    header = rows[0]
    image_cols = [i for i, name in enumerate(header)
                  if name.startswith("image_")]
    if not image_cols:
        raise ValueError("manifest has no image_N columns")
    base = source.parent
    groups = []
    for n, col in enumerate(image_cols, start=1):
        label = "" if len(image_cols) == 1 else f"sec{n}"
        entries = []
        for row in rows[1:]:
            sid = row[0]
            entries.append((sid, base / row[col]))
        groups.append((label, entries))
    return groups


def extract_vectors(model: VisionTransformer, spec, entries):
    """Forward each (id, path) through the frozen model; (ids, float32 matrix)."""
    torch.set_num_threads(1)
    ids, rows = [], []
    with torch.no_grad():
        for sid, path in entries:
            arr = prepare_image(path, spec, image_size=model.config.image_size)
            feat = model(torch.from_numpy(arr).unsqueeze(0))
            vec = feat.squeeze(0).numpy().astype(np.float32)
            if vec.shape != (spec.feature_length,):
                raise RuntimeError(
                    f"{spec.name} produced {vec.shape[0]} features, registry "
                    f"says {spec.feature_length}")
            ids.append(sid)
            rows.append(vec)
    return ids, np.vstack(rows)


def run_extraction(backbone_name: str, source, out, checkpoints=None):
    """Full extract command: resolve images, load the model, write files.

    Returns the list of written paths.
    """
    spec = backbone(backbone_name)
    model = load_model(backbone_name, checkpoints)
    out = Path(out)
    written = []
    for label, entries in list_images(source):
        ids, matrix = extract_vectors(model, spec, entries)
        if label:
            target = out.with_name(f"{out.stem}_{label}{out.suffix}")
        else:
            target = out
        write_features(ids, matrix, spec.extractor_id, target)
        written.append(target)
    return written
