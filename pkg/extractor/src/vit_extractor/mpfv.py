"""MPFV1 feature-file writer (and a reader for self-checks).

This is the binary contract shared with the regression pipeline:
little-endian, magic "MPFV", three uint32 (version 1, feature dim,
record count), a uint16-length-prefixed UTF-8 extractor id, then per
record a uint16-length-prefixed sample id and dim float32 values.
Implemented here independently so the two packages only meet at the
bytes.
"""

import struct
from pathlib import Path

import numpy as np

__all__ = ["write_features", "read_features"]

MAGIC = b"MPFV"
VERSION = 1


def _encode_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for a 16-bit length prefix")
    return struct.pack("<H", len(raw)) + raw


def write_features(ids, matrix, extractor_id: str, path) -> None:
    """Write sample ids and a (count, dim) float32 matrix as MPFV1."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValueError("feature matrix must be 2D")
    if len(ids) != matrix.shape[0]:
        raise ValueError("id count does not match the matrix rows")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sample ids")
    if not np.isfinite(matrix).all():
        raise ValueError("features must be finite")
    parts = [MAGIC, struct.pack("<III", VERSION, matrix.shape[1],
                                matrix.shape[0]),
             _encode_str(extractor_id)]
    for sid, row in zip(ids, matrix):
        parts.append(_encode_str(sid))
        parts.append(row.tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_features(path):
    """Read an MPFV1 file back: (ids, float32 matrix, extractor_id)."""
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    if raw[:4] != MAGIC:
        raise ValueError("bad magic; not an MPFV file")
    version, dim, count = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported MPFV version {version}")
    offset = 16

    def take_str():
        nonlocal offset
        (length,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        text = view[offset:offset + length].tobytes().decode("utf-8")
        offset += length
        return text

    extractor_id = take_str()
    ids, rows = [], []
    for _ in range(count):
        ids.append(take_str())
        row = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
        rows.append(row)
    if offset != len(raw):
        raise ValueError("trailing bytes after the last record")
    matrix = np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float32)
    return ids, matrix, extractor_id
