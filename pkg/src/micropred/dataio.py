"""Dataset loading and the feature-file interchange format.

File surfaces:
  * manifest CSV:  sample_id,image_1[,image_2,image_3],target,target_unit
                   [,<element_1>..<element_22>]
  * 3D volume:     raw .bin payload (one byte per voxel, x-fastest order)
                   plus a .meta sidecar declaring nx/ny/nz
  * feature files: MPFV1 binary (little-endian throughout) with a CSV
                   fallback; both round-trip values at 32-bit precision
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureSet

__all__ = [
    "STANDARD_GRAVITY",
    "GPA_PER_KGF_MM2",
    "CompositionVector",
    "SampleManifest",
    "Volume3D",
    "FeatureFileError",
    "load_manifest",
    "write_manifest",
    "normalize_targets",
    "load_volume",
    "write_volume",
    "read_features",
    "write_features",
    "convert_hardness",
    "volume_fraction",
]

STANDARD_GRAVITY = 9.80665
# 1 GPa expressed in kgf/mm^2
KGF_MM2_PER_GPA = 1000.0 / STANDARD_GRAVITY
GPA_PER_KGF_MM2 = STANDARD_GRAVITY / 1000.0

HARDNESS_UNITS = ("GPa", "kgf_mm2")
TARGET_UNITS = ("GPa", "kgf_mm2", "dimensionless")

MPFV_MAGIC = b"MPFV"
MPFV_VERSION = 1


class FeatureFileError(ValueError):
    """Malformed feature file (bad magic, truncation, bad values)."""


@dataclass(frozen=True)
class CompositionVector:
    """Concentrations of 22 elements in a fixed order.

    The unit convention (weight vs atomic percent) is not interpreted here;
    raw numbers are stored and the element order comes from the manifest
    header.
    """

    values: np.ndarray
    element_names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        names = tuple(self.element_names)
        if values.shape != (22,) or len(names) != 22:
            raise ValueError(f"composition arity: expected 22 elements, got {values.size}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("composition values must be finite and non-negative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "element_names", names)


@dataclass(frozen=True)
class SampleManifest:
    sample_id: str
    image_paths: tuple
    target_value: float
    target_unit: str
    composition: CompositionVector | None = None

    def __post_init__(self):
        if not self.image_paths:
            raise ValueError("image_paths must be non-empty")
        if not np.isfinite(self.target_value):
            raise ValueError(f"non-finite target for sample {self.sample_id!r}")
        if self.target_unit not in TARGET_UNITS:
            raise ValueError(f"unknown target_unit {self.target_unit!r}")


@dataclass(frozen=True)
class Volume3D:
    """Two-phase voxel microstructure with labels in {0, 1}."""

    dims: tuple
    voxels: np.ndarray  # shape (nx, ny, nz), uint8

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 1:
            raise ValueError(f"degenerate dims {self.dims}")
        voxels = np.asarray(self.voxels, dtype=np.uint8)
        if voxels.shape != (nx, ny, nz):
            raise ValueError(
                f"size mismatch: dims {self.dims} vs payload shape {voxels.shape}")
        if voxels.size and voxels.max() > 1:
            raise ValueError("label outside {0,1}")
        voxels.setflags(write=False)
        object.__setattr__(self, "dims", (int(nx), int(ny), int(nz)))
        object.__setattr__(self, "voxels", voxels)


def volume_fraction(labels, phase: int = 1) -> float:
    """Fraction of sites carrying `phase`; works on Volume3D or a label array."""
    arr = labels.voxels if isinstance(labels, Volume3D) else np.asarray(labels)
    return float(np.mean(arr == phase))


def convert_hardness(value: float, from_unit: str, to_unit: str) -> float:
    """Convert hardness between GPa and kgf/mm^2 (1 GPa = 1000/g kgf/mm^2).

    Same-unit conversion is the identity, including for "dimensionless".
    """
    if not np.isfinite(value):
        raise ValueError("hardness value must be finite")
    if from_unit == to_unit:
        if from_unit not in TARGET_UNITS:
            raise ValueError(f"unknown unit {from_unit!r}")
        return float(value)
    if from_unit == "GPa" and to_unit == "kgf_mm2":
        return float(value * KGF_MM2_PER_GPA)
    if from_unit == "kgf_mm2" and to_unit == "GPa":
        return float(value * GPA_PER_KGF_MM2)
    raise ValueError(f"unsupported unit pair {from_unit!r} -> {to_unit!r}")


def normalize_targets(manifests, to_unit: str = "kgf_mm2"):
    """Convert all hardness targets to one unit; dimensionless rows pass through."""
    out = []
    for m in manifests:
        if m.target_unit == "dimensionless" or m.target_unit == to_unit:
            out.append(m)
        else:
            out.append(SampleManifest(
                m.sample_id, m.image_paths,
                convert_hardness(m.target_value, m.target_unit, to_unit),
                to_unit, m.composition))
    return out


def load_manifest(path) -> list:
    """Parse a manifest CSV into SampleManifest entries, one per data row.

    Image paths are resolved relative to the manifest's directory and must
    exist. Trailing columns after target_unit are element concentrations and
    must number exactly 22 when present.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty manifest")
    header = [h.strip() for h in rows[0]]
    required = ("sample_id", "target", "target_unit")
    for col in required:
        if col not in header:
            raise ValueError(f"manifest missing column {col!r}")
    image_cols = [i for i, h in enumerate(header) if h in ("image_1", "image_2", "image_3")]
    if not image_cols:
        raise ValueError("manifest missing image_1 column")
    unit_pos = header.index("target_unit")
    element_names = header[unit_pos + 1:]
    if element_names and len(element_names) != 22:
        raise ValueError(
            f"composition arity: expected 22 element columns, got {len(element_names)}")

    id_pos = header.index("sample_id")
    target_pos = header.index("target")
    manifests = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        sid = row[id_pos].strip()
        if sid in seen:
            raise ValueError(f"duplicate sample_id {sid!r}")
        seen.add(sid)
        paths = []
        for i in image_cols:
            cell = row[i].strip()
            if cell:
                p = (path.parent / cell).resolve()
                if not p.exists():
                    raise FileNotFoundError(f"image not found for {sid!r}: {cell}")
                paths.append(p)
        try:
            target = float(row[target_pos])
        except ValueError:
            raise ValueError(f"non-numeric target for sample {sid!r}: {row[target_pos]!r}")
        composition = None
        if element_names:
            try:
                conc = [float(row[unit_pos + 1 + j]) for j in range(22)]
            except ValueError:
                raise ValueError(f"non-numeric composition entry for sample {sid!r}")
            composition = CompositionVector(np.array(conc), tuple(element_names))
        manifests.append(SampleManifest(
            sid, tuple(paths), target, row[unit_pos].strip(), composition))
    return manifests


def write_manifest(manifests, path) -> None:
    """Write SampleManifest entries as a manifest CSV.

    Image paths are stored relative to the manifest's directory when they
    live under it, absolute otherwise. All rows must agree on image count
    and on whether composition is present.
    """
    manifests = list(manifests)
    if not manifests:
        raise ValueError("nothing to write")
    path = Path(path)
    n_images = len(manifests[0].image_paths)
    has_comp = manifests[0].composition is not None
    for m in manifests:
        if len(m.image_paths) != n_images:
            raise ValueError("inconsistent image count across samples")
        if (m.composition is not None) != has_comp:
            raise ValueError("composition present for only some samples")
    header = ["sample_id"] + [f"image_{i + 1}" for i in range(n_images)]
    header += ["target", "target_unit"]
    if has_comp:
        names = manifests[0].composition.element_names
        for m in manifests:
            if m.composition.element_names != names:
                raise ValueError("inconsistent element names across samples")
        header += list(names)
    base = path.resolve().parent
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for m in manifests:
            cells = [m.sample_id]
            for p in m.image_paths:
                p = Path(p).resolve()
                try:
                    cells.append(p.relative_to(base).as_posix())
                except ValueError:
                    cells.append(str(p))
            cells += [repr(float(m.target_value)), m.target_unit]
            if has_comp:
                cells += [repr(float(v)) for v in m.composition.values]
            writer.writerow(cells)


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".meta")


def load_volume(path) -> Volume3D:
    """Read a binary voxel volume (.bin payload + .meta sidecar with nx/ny/nz).

    The payload stores one byte per voxel in x-fastest order:
    index = x + nx*(y + ny*z).
    """
    path = Path(path)
    meta = _sidecar_path(path)
    if not path.exists():
        raise FileNotFoundError(f"volume payload not found: {path}")
    if not meta.exists():
        raise FileNotFoundError(f"volume sidecar not found: {meta}")
    fields = {}
    for line in meta.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        nx, ny, nz = (int(fields[k]) for k in ("nx", "ny", "nz"))
    except KeyError as exc:
        raise ValueError(f"sidecar missing field {exc.args[0]!r}")
    payload = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if payload.size != nx * ny * nz:
        raise ValueError(
            f"size mismatch: sidecar declares {nx * ny * nz} voxels, payload has {payload.size}")
    voxels = payload.reshape((nz, ny, nx)).transpose(2, 1, 0)
    return Volume3D((nx, ny, nz), voxels)


def write_volume(volume: Volume3D, path) -> None:
    path = Path(path)
    nx, ny, nz = volume.dims
    _sidecar_path(path).write_text(f"nx = {nx}\nny = {ny}\nnz = {nz}\n", encoding="utf-8")
    path.write_bytes(volume.voxels.transpose(2, 1, 0).tobytes())


def write_features(fset: FeatureSet, path) -> None:
    """Serialize a FeatureSet; MPFV1 binary unless the path ends in .csv."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        _write_features_csv(fset, path)
        return
    buf = io.BytesIO()
    buf.write(MPFV_MAGIC)
    buf.write(struct.pack("<III", MPFV_VERSION, fset.dim, len(fset)))
    eid = fset.extractor_id.encode("utf-8")
    buf.write(struct.pack("<H", len(eid)))
    buf.write(eid)
    matrix32 = fset.matrix.astype("<f4")
    for row, sid in enumerate(fset.ids):
        sid_bytes = sid.encode("utf-8")
        buf.write(struct.pack("<H", len(sid_bytes)))
        buf.write(sid_bytes)
        buf.write(matrix32[row].tobytes())
    path.write_bytes(buf.getvalue())


def read_features(path) -> FeatureSet:
    """Parse a feature file, sniffing MPFV1 binary vs the CSV fallback."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"feature file not found: {path}")
    raw = path.read_bytes()
    if raw[:4] == MPFV_MAGIC:
        return _read_features_mpfv(raw)
    if path.suffix.lower() == ".csv" or raw[:1] in (b"#", b"s"):
        return _read_features_csv(raw)
    raise FeatureFileError(f"bad magic: {raw[:4]!r}")


def _read_features_mpfv(raw: bytes) -> FeatureSet:
    def take(n, what):
        nonlocal offset
        if offset + n > len(raw):
            raise FeatureFileError(f"truncated record: ran out of bytes reading {what}")
        chunk = raw[offset:offset + n]
        offset += n
        return chunk

    offset = 4
    version, dim, count = struct.unpack("<III", take(12, "header"))
    if version != MPFV_VERSION:
        raise FeatureFileError(f"bad version: {version}")
    if dim == 0:
        raise FeatureFileError("feature dimension must be positive")
    (eid_len,) = struct.unpack("<H", take(2, "extractor_id length"))
    extractor_id = take(eid_len, "extractor_id").decode("utf-8")
    ids = []
    matrix = np.empty((count, dim), dtype=np.float32)
    for rec in range(count):
        (sid_len,) = struct.unpack("<H", take(2, "sample_id length"))
        ids.append(take(sid_len, "sample_id").decode("utf-8"))
        matrix[rec] = np.frombuffer(take(4 * dim, "values"), dtype="<f4")
    if offset != len(raw):
        raise FeatureFileError(
            f"declared count {count} does not match payload ({len(raw) - offset} trailing bytes)")
    if len(set(ids)) != len(ids):
        raise FeatureFileError("duplicate sample_id in feature file")
    if not np.all(np.isfinite(matrix)):
        raise FeatureFileError("non-finite value in feature file")
    return FeatureSet(ids, matrix.astype(np.float64), extractor_id)


def _write_features_csv(fset: FeatureSet, path: Path) -> None:
    # repr() of the float32 value round-trips exactly through the parser
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# extractor_id: {fset.extractor_id}\n")
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [f"f{i}" for i in range(fset.dim)])
        matrix32 = fset.matrix.astype(np.float32)
        for row, sid in enumerate(fset.ids):
            writer.writerow([sid] + [repr(float(v)) for v in matrix32[row]])


def _read_features_csv(raw: bytes) -> FeatureSet:
    text = raw.decode("utf-8")
    extractor_id = "csv"
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        _, _, tail = lines[0].partition(":")
        extractor_id = tail.strip()
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if len(rows) < 2:
        raise FeatureFileError("feature CSV has no data rows")
    header = rows[0]
    dim = len(header) - 1
    if dim < 1:
        raise FeatureFileError("feature CSV has no value columns")
    ids, vectors = [], []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != dim + 1:
            raise FeatureFileError("truncated record in feature CSV")
        ids.append(row[0])
        try:
            vectors.append(np.array([np.float32(v) for v in row[1:]], dtype=np.float32))
        except ValueError:
            raise FeatureFileError(f"bad value in feature CSV row {row[0]!r}")
    matrix = np.stack(vectors)
    if len(set(ids)) != len(ids):
        raise FeatureFileError("duplicate sample_id in feature file")
    if not np.all(np.isfinite(matrix)):
        raise FeatureFileError("non-finite value in feature file")
    return FeatureSet(ids, matrix.astype(np.float64), extractor_id)
