"""Embedding sets, pair manifests, and the T2AVEMB1 interchange format.

An embedding set is an N x D float32 matrix with optional segment
structure: when ``segments_per_clip`` (T) is positive, N is a multiple of
T and rows are grouped clip-major, segment-minor.  Sets are immutable
value objects; every transformation returns a new set.

File layout (little-endian throughout)::

    bytes 0..7   magic ASCII "T2AVEMB1"
    u32          version (1)
    u32          dim D
    u64          count N
    u32          segments_per_clip T
    u32          dtype code (0 = float32)
    N*D floats   payload, row-major

The 32-byte header is followed by exactly N*D payload values; anything
shorter or longer is rejected.  A JSON sidecar with extension
".pairs.json" carries pair manifests.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    DataError,
    NonFiniteValueError,
    TruncatedPayloadError,
    VersionMismatchError,
)

MAGIC = b"T2AVEMB1"
FORMAT_VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<8sIIQII")  # magic, version, dim, count, segments, dtype
HEADER_SIZE = HEADER.size  # 32 bytes

MODALITIES = ("audio", "video", "text", "latent", "probs")


class EmbeddingSet:
    """Immutable N x D float32 matrix with segment structure and provenance.

    ``modality`` is provenance annotation only; it is not stored in the
    binary format and does not participate in equality.
    """

    __slots__ = ("data", "segments_per_clip", "modality")

    def __init__(self, data: np.ndarray, segments_per_clip: int = 0,
                 modality: str = "latent"):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"embedding data must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise DataError("embedding dim must be positive")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("embedding data contains NaN or Inf")
        t = int(segments_per_clip)
        if t < 0:
            raise DataError("segments_per_clip must be >= 0")
        if t > 0 and arr.shape[0] % t != 0:
            raise DataError(
                f"count {arr.shape[0]} is not a multiple of segments_per_clip {t}")
        if modality not in MODALITIES:
            raise DataError(f"unknown modality {modality!r}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.data = arr
        self.segments_per_clip = t
        self.modality = modality

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def n_clips(self) -> int:
        t = self.segments_per_clip
        return self.count // t if t > 0 else self.count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (self.dim == other.dim
                and self.segments_per_clip == other.segments_per_clip
                and np.array_equal(self.data, other.data))

    def __hash__(self):  # value object, but arrays are unhashable
        return hash((self.count, self.dim, self.segments_per_clip))

    def __repr__(self) -> str:
        return (f"EmbeddingSet(count={self.count}, dim={self.dim}, "
                f"segments_per_clip={self.segments_per_clip}, "
                f"modality={self.modality!r})")

    def with_modality(self, modality: str) -> "EmbeddingSet":
        return EmbeddingSet(self.data, self.segments_per_clip, modality)

    def clip_rows(self, clip: int) -> np.ndarray:
        """Rows of one clip (requires segment structure)."""
        t = self.segments_per_clip
        if t == 0:
            raise DataError("set is unsegmented")
        if not 0 <= clip < self.n_clips:
            raise DataError(f"clip index {clip} out of range")
        return self.data[clip * t:(clip + 1) * t]


@dataclass(frozen=True)
class ProjectionSpec:
    """How to reconcile embedding dimensions across modalities.

    kind "pad_truncate" zero-pads up or truncates down to ``target_dim``;
    kind "matrix" applies a fixed D_in x D_out linear map row-wise.
    """

    kind: str  # "matrix" | "pad_truncate"
    matrix: np.ndarray | None = None
    target_dim: int | None = None

    def __post_init__(self):
        if self.kind not in ("matrix", "pad_truncate"):
            raise DataError(f"unknown projection kind {self.kind!r}")
        if self.kind == "matrix":
            if self.matrix is None:
                raise DataError("matrix projection requires a matrix")
            m = np.asarray(self.matrix, dtype=np.float32)
            if m.ndim != 2:
                raise DataError("projection matrix must be 2-D")
            object.__setattr__(self, "matrix", m)

    def describe(self) -> str:
        if self.kind == "matrix":
            d_in, d_out = self.matrix.shape
            return f"matrix({d_in}->{d_out})"
        if self.target_dim is not None:
            return f"pad_truncate(->{self.target_dim})"
        return "pad_truncate"


@dataclass(frozen=True)
class Pair:
    id: str
    audio_row: int
    visual_row: int
    text_row: int
    label: str  # "true_pair" | "false_pair"
    shift_s: float = 0.0
    class_tag: str = ""

    def __post_init__(self):
        if self.label not in ("true_pair", "false_pair"):
            raise DataError(f"unknown pair label {self.label!r}")
        if self.shift_s < 0:
            raise DataError("shift_s must be >= 0")


@dataclass
class PairManifest:
    """Per-pair metadata: which rows pair up, true/false label, shift, class."""

    pairs: list[Pair] = field(default_factory=list)
    version: int = 1

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise DataError("pair ids must be unique")

    def validate_against(self, audio: EmbeddingSet, video: EmbeddingSet,
                         text: EmbeddingSet) -> None:
        """Row indices must be in bounds of their referenced sets."""
        for p in self.pairs:
            for row, s, name in ((p.audio_row, audio, "audio"),
                                 (p.visual_row, video, "visual"),
                                 (p.text_row, text, "text")):
                if not 0 <= row < s.count:
                    raise DataError(
                        f"pair {p.id!r}: {name}_row {row} out of bounds "
                        f"(count {s.count})")

    def to_json(self) -> str:
        doc = {"version": self.version,
               "pairs": [{"id": p.id, "audio_row": p.audio_row,
                          "visual_row": p.visual_row, "text_row": p.text_row,
                          "label": p.label, "shift_s": p.shift_s,
                          "class_tag": p.class_tag} for p in self.pairs]}
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PairManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise DataError(f"manifest is not valid JSON: {e}") from e
        try:
            pairs = [Pair(id=str(p["id"]), audio_row=int(p["audio_row"]),
                          visual_row=int(p["visual_row"]),
                          text_row=int(p["text_row"]), label=str(p["label"]),
                          shift_s=float(p.get("shift_s", 0.0)),
                          class_tag=str(p.get("class_tag", "")))
                     for p in doc["pairs"]]
            return cls(pairs=pairs, version=int(doc.get("version", 1)))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed manifest: {e}") from e

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "PairManifest":
        return cls.from_json(Path(path).read_text())


def write_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    """Write a set to ``path`` in the T2AVEMB1 layout.

    The emitted file round-trips bit-exactly through read_embeddings.
    """
    header = HEADER.pack(MAGIC, FORMAT_VERSION, emb.dim, emb.count,
                         emb.segments_per_clip, DTYPE_F32)
    payload = np.ascontiguousarray(emb.data, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_embeddings(path: str | Path, modality: str = "latent") -> EmbeddingSet:
    """Read a T2AVEMB1 file, validating header and payload.

    Raises a distinct error per failure mode: bad magic, version mismatch,
    truncated (or oversized) payload, non-finite values.
    """
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError(f"{path}: file shorter than header")
    magic, version, dim, count, segments, dtype = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: unsupported version {version} (expected {FORMAT_VERSION})")
    if dtype != DTYPE_F32:
        raise VersionMismatchError(f"{path}: unsupported dtype code {dtype}")
    if dim < 1:
        raise TruncatedPayloadError(f"{path}: header declares dim {dim}")
    expected = count * dim * 4
    got = len(raw) - HEADER_SIZE
    if got != expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {got} bytes, header declares {expected}")
    data = np.frombuffer(raw, dtype="<f4", count=count * dim,
                         offset=HEADER_SIZE).reshape(count, dim)
    if not np.isfinite(data).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN or Inf")
    try:
        return EmbeddingSet(data, segments_per_clip=segments, modality=modality)
    except DataError as e:
        raise TruncatedPayloadError(f"{path}: inconsistent header: {e}") from e


def select_rows(emb: EmbeddingSet, indices: Sequence[int] | Iterable[int],
                segments_per_clip: int | None = None) -> EmbeddingSet:
    """Copy rows in the given order.

    The result keeps the source segment structure only if it still divides
    the new count; pass ``segments_per_clip`` to set it explicitly.
    """
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= emb.count):
        bad = idx[(idx < 0) | (idx >= emb.count)][0]
        raise DataError(f"row index {bad} out of bounds (count {emb.count})")
    data = emb.data[idx] if idx.size else np.zeros((0, emb.dim), np.float32)
    if segments_per_clip is None:
        t = emb.segments_per_clip
        segments_per_clip = t if (t > 0 and len(idx) % t == 0) else 0
    return EmbeddingSet(data, segments_per_clip, emb.modality)


def select_clips(emb: EmbeddingSet, clips: Sequence[int]) -> EmbeddingSet:
    """Select whole clips from a segmented set, keeping segment structure."""
    t = emb.segments_per_clip
    if t == 0:
        return select_rows(emb, clips)
    rows: list[int] = []
    for c in clips:
        if not 0 <= c < emb.n_clips:
            raise DataError(f"clip index {c} out of bounds ({emb.n_clips} clips)")
        rows.extend(range(c * t, (c + 1) * t))
    return select_rows(emb, rows, segments_per_clip=t)


def project(emb: EmbeddingSet, spec: ProjectionSpec) -> EmbeddingSet:
    """Apply a row-wise linear dimension adapter."""
    if spec.kind == "matrix":
        d_in, _ = spec.matrix.shape
        if d_in != emb.dim:
            raise DataError(
                f"projection expects dim {d_in}, set has dim {emb.dim}")
        out = np.asarray(emb.data @ spec.matrix, dtype=np.float32)
        return EmbeddingSet(out, emb.segments_per_clip, emb.modality)
    # pad_truncate
    if spec.target_dim is None:
        raise DataError("pad_truncate projection requires target_dim")
    target = int(spec.target_dim)
    if target < 1:
        raise DataError("target_dim must be positive")
    if target == emb.dim:
        return emb
    if target < emb.dim:
        out = emb.data[:, :target].copy()
    else:
        out = np.zeros((emb.count, target), dtype=np.float32)
        out[:, :emb.dim] = emb.data
    return EmbeddingSet(out, emb.segments_per_clip, emb.modality)


def shift_segments(emb: EmbeddingSet, k: int, mode: str = "pad_zero") -> EmbeddingSet:
    """Shift segments forward by k within each clip.

    Segment i of the result sources from segment i-k.  "cyclic" wraps
    around; "pad_zero" fills the vacated leading segments with zero rows.
    """
    t = emb.segments_per_clip
    if t == 0:
        raise DataError("shift_segments requires a segmented set")
    if not 0 <= k < t:
        raise DataError(f"shift k={k} out of range [0, {t})")
    if mode not in ("cyclic", "pad_zero"):
        raise DataError(f"unknown shift mode {mode!r}")
    if k == 0:
        return emb
    clips = emb.data.reshape(emb.n_clips, t, emb.dim)
    out = np.empty_like(clips)
    out[:, k:] = clips[:, :t - k]
    if mode == "cyclic":
        out[:, :k] = clips[:, t - k:]
    else:
        out[:, :k] = 0.0
    return EmbeddingSet(out.reshape(emb.count, emb.dim), t, emb.modality)


def average_sets(a: EmbeddingSet, b: EmbeddingSet) -> EmbeddingSet:
    """Elementwise mean of corresponding rows; shapes must match."""
    if a.count != b.count or a.dim != b.dim:
        raise DataError(
            f"shape mismatch: {a.count}x{a.dim} vs {b.count}x{b.dim}")
    if a.segments_per_clip != b.segments_per_clip:
        raise DataError("segment structure mismatch")
    out = (a.data + b.data) / np.float32(2.0)
    return EmbeddingSet(out, a.segments_per_clip, a.modality)
