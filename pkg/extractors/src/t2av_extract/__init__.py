"""Embedding extractors feeding the t2av evaluation engine.

Turns real media clips into T2AVEMB1 embedding files and pair
manifests, one modality per invocation.  Talks to the engine only
through its documented file formats.
"""

from .clips import ClipRef, load_clips
from .emb_writer import read_header, write_embedding_file
from .encoders import (FrameStatsEncoder, HashVecEncoder, LogMelEncoder,
                       WordVecFileEncoder, audio_encoder, text_encoder,
                       video_encoder)
from .errors import (DecodeError, EncoderUnavailableError, ExtractError,
                     VocabularyError)
from .extract import (build_pair_manifest, extract_audio, extract_text,
                      extract_video)

__all__ = [
    "ClipRef", "load_clips",
    "read_header", "write_embedding_file",
    "LogMelEncoder", "FrameStatsEncoder", "HashVecEncoder",
    "WordVecFileEncoder",
    "audio_encoder", "video_encoder", "text_encoder",
    "ExtractError", "DecodeError", "EncoderUnavailableError",
    "VocabularyError",
    "extract_audio", "extract_video", "extract_text", "build_pair_manifest",
]
