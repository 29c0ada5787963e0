"""Writer for the T2AVEMB1 interchange format.

Layout: 8-byte ASCII magic "T2AVEMB1", u32 version (1), u32 dim, u64
row count, u32 segments_per_clip, u32 dtype code (0 = little-endian
f32), then the rows as packed f32 values in row-major order.  All
header integers are little-endian.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ExtractError

MAGIC = b"T2AVEMB1"
VERSION = 1
HEADER = struct.Struct("<8sIIQII")
DTYPE_F32 = 0


def write_embedding_file(path: str | Path, rows: np.ndarray,
                         segments_per_clip: int) -> None:
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ExtractError(f"rows must be 2-D, got shape {rows.shape}")
    if rows.shape[0] < 1 or rows.shape[1] < 1:
        raise ExtractError(f"rows must be nonempty, got shape {rows.shape}")
    if segments_per_clip < 1:
        raise ExtractError("segments_per_clip must be >= 1")
    payload = np.ascontiguousarray(rows, dtype="<f4")
    if not np.isfinite(payload).all():
        raise ExtractError("rows contain NaN or Inf")
    count, dim = payload.shape
    header = HEADER.pack(MAGIC, VERSION, dim, count, segments_per_clip,
                         DTYPE_F32)
    Path(path).write_bytes(header + payload.tobytes())


def read_header(path: str | Path) -> tuple[int, int, int]:
    """Return (dim, count, segments_per_clip) from an embedding file.

    Only the header is read; the payload stays on disk.
    """
    path = Path(path)
    if not path.is_file():
        raise ExtractError(f"no such file: {path}")
    raw = path.read_bytes()[:HEADER.size]
    if len(raw) < HEADER.size:
        raise ExtractError(f"{path}: truncated header")
    magic, version, dim, count, segments, dtype = HEADER.unpack(raw)
    if magic != MAGIC:
        raise ExtractError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ExtractError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise ExtractError(f"{path}: unsupported dtype code {dtype}")
    return int(dim), int(count), int(segments)
