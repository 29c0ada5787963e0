"""Batch extraction: clip lists in, embedding files out."""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .clips import ClipRef
from .emb_writer import read_header, write_embedding_file
from .encoders import audio_encoder, text_encoder, video_encoder
from .errors import DecodeError, ExtractError


def _clip_rows(encoder, clip: ClipRef) -> np.ndarray:
    try:
        return np.asarray(encoder.rows(clip), dtype=np.float64)
    except DecodeError as e:
        raise DecodeError(f"clip {clip.id!r}: {e}") from e
    except ExtractError:
        raise
    except Exception as e:
        # decoder backends raise their own types; fold them in here so
        # the failing clip is always named
        raise DecodeError(f"clip {clip.id!r}: {e}") from e


def _extract(clips, encoder, out_path, max_workers):
    if not clips:
        raise ExtractError("no clips to extract")
    if max_workers is None:
        max_workers = min(8, os.cpu_count() or 1)
    if max_workers <= 1 or len(clips) == 1:
        per_clip = [_clip_rows(encoder, c) for c in clips]
    else:
        # map returns results in submission order, so the output bytes
        # cannot depend on worker scheduling
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            per_clip = list(pool.map(lambda c: _clip_rows(encoder, c), clips))
    segs = {r.shape[0] for r in per_clip}
    if len(segs) != 1:
        raise ExtractError(
            f"clips disagree on segment count: {sorted(segs)}; all clips "
            f"in one batch must share a duration")
    (n_seg,) = segs
    rows = np.concatenate(per_clip, axis=0)
    write_embedding_file(out_path, rows, n_seg)
    return rows.shape


def extract_audio(clips: list[ClipRef], encoder_id: str, out_path,
                  max_workers: int | None = None) -> tuple[int, int]:
    """Encode every clip's audio and write one embedding file.

    Returns the written (row count, dim).  Clips are processed in
    parallel; rows land in clip order, segment-major within a clip.
    """
    return _extract(clips, audio_encoder(encoder_id), out_path, max_workers)


def extract_video(clips: list[ClipRef], encoder_id: str, out_path,
                  max_workers: int | None = None) -> tuple[int, int]:
    return _extract(clips, video_encoder(encoder_id), out_path, max_workers)


def extract_text(tags: list[str], encoder_id: str,
                 out_path) -> tuple[int, int]:
    """Encode one row per tag; multi-word tags average their word vectors."""
    encoder = text_encoder(encoder_id)
    if not tags:
        raise ExtractError("no tags to encode")
    for tag in tags:
        if not isinstance(tag, str) or not tag.strip():
            raise ExtractError("tags must be non-empty strings")
    rows = np.stack([encoder.row(t) for t in tags])
    write_embedding_file(out_path, rows, 1)
    return rows.shape


def build_pair_manifest(clips: list[ClipRef], audio_path, video_path,
                        text_path, out_path) -> int:
    """Write the pair manifest tying one clip to its rows in each file.

    Each modality file must hold exactly one clip's worth of rows per
    clip, in clip order; the manifest points at the first segment row.
    Returns the number of pairs written.
    """
    seg_counts = []
    for path in (audio_path, video_path, text_path):
        _, count, segs = read_header(path)
        if count != len(clips) * segs:
            raise ExtractError(
                f"{path}: {count} rows cannot cover {len(clips)} clips "
                f"at {segs} segments each")
        seg_counts.append(segs)
    a_segs, v_segs, t_segs = seg_counts
    pairs = [{"id": c.id, "audio_row": i * a_segs, "visual_row": i * v_segs,
              "text_row": i * t_segs, "label": "true_pair", "shift_s": 0.0,
              "class_tag": c.class_tag} for i, c in enumerate(clips)]
    doc = {"version": 1, "pairs": pairs}
    Path(out_path).write_text(json.dumps(doc, indent=2))
    return len(pairs)
