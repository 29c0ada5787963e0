"""Built-in encoders and the id registry.

The defaults are self-contained stand-ins for the usual pretrained
checkpoints: log-mel statistics in place of a VGGish-class audio
tagger, grayscale frame statistics in place of a C3D-class video
network, hash-seeded word vectors in place of a trained word2vec
table.  Each keeps the hop and output width of the family it mirrors,
so the files they emit are drop-in compatible with ones produced by
the real checkpoints.  A trained word-vector table in the common text
format can be loaded with the id ``word2vec:<path>``.
"""

import hashlib
import re
import wave
from pathlib import Path

import cv2
import numpy as np

from .errors import DecodeError, EncoderUnavailableError, ExtractError, \
    VocabularyError

AUDIO_HOP_S = 0.96
VIDEO_HOP_S = 1.0
TEXT_DIM = 300

_MEL_BANDS = 64
_MEL_FMIN = 125.0
_MEL_FMAX = 7500.0
_WIN_S = 0.025
_FRAME_HOP_S = 0.010
_LOG_FLOOR = 1e-6
_SIDE = 64

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def _read_wav(path: Path) -> tuple[np.ndarray, int]:
    """Decode a PCM WAV file to mono float64 in [-1, 1]."""
    with wave.open(str(path), "rb") as w:
        rate = w.getframerate()
        width = w.getsampwidth()
        channels = w.getnchannels()
        raw = w.readframes(w.getnframes())
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2") / 32768.0
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4") / 2147483648.0
    elif width == 1:
        # 8-bit WAV is unsigned by convention
        data = (np.frombuffer(raw, dtype=np.uint8) - 128.0) / 128.0
    else:
        raise DecodeError(f"unsupported sample width {width}")
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return np.asarray(data, dtype=np.float64), rate


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def _mel_bank(rate: int, win: int) -> np.ndarray:
    fmax = min(_MEL_FMAX, rate / 2.0)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(_MEL_FMIN), _hz_to_mel(fmax),
                                   _MEL_BANDS + 2))
    freqs = np.fft.rfftfreq(win, d=1.0 / rate)
    bank = np.zeros((_MEL_BANDS, freqs.shape[0]))
    for b in range(_MEL_BANDS):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - freqs) / max(hi - mid, 1e-12)
        bank[b] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


class LogMelEncoder:
    """VGGish-class audio features: 64 log-mel bands per 0.96 s hop.

    Each hop is analyzed with a 25 ms Hann window advanced every 10 ms,
    and the band energies are summarized as per-band mean and standard
    deviation over the hop, giving 128 values per segment row.
    """

    id = "logmel"
    dim = 2 * _MEL_BANDS
    hop_s = AUDIO_HOP_S

    def rows(self, clip) -> np.ndarray:
        samples, rate = _read_wav(Path(clip.path))
        start = int(round(clip.start_s * rate))
        need = int(round(clip.duration_s * rate))
        if start + need > samples.shape[0]:
            raise DecodeError(
                f"audio holds {samples.shape[0] / rate:.2f} s, need "
                f"{clip.start_s + clip.duration_s:.2f} s")
        n_seg = int(clip.duration_s / self.hop_s)
        if n_seg < 1:
            raise DecodeError(
                f"duration {clip.duration_s} s is below one {self.hop_s} s hop")
        window = samples[start:start + need]
        hop = int(round(self.hop_s * rate))
        win = max(2, int(round(_WIN_S * rate)))
        step = max(1, int(round(_FRAME_HOP_S * rate)))
        bank = _mel_bank(rate, win)
        taper = np.hanning(win)
        out = np.empty((n_seg, self.dim))
        for s in range(n_seg):
            seg = window[s * hop:(s + 1) * hop]
            n_frames = 1 + max(0, (seg.shape[0] - win) // step)
            idx = np.arange(win)[None, :] + step * np.arange(n_frames)[:, None]
            spec = np.abs(np.fft.rfft(seg[idx] * taper, axis=1))
            mel = np.log(spec @ bank.T + _LOG_FLOOR)
            out[s] = np.concatenate([mel.mean(axis=0), mel.std(axis=0)])
        return out


class FrameStatsEncoder:
    """C3D-class video features: mean 64x64 grayscale image per second.

    A media file is decoded with OpenCV and frames are pooled into 1 s
    segments; a directory is treated as one image per second, ordered
    by filename.
    """

    id = "framestats"
    dim = _SIDE * _SIDE
    hop_s = VIDEO_HOP_S

    def rows(self, clip) -> np.ndarray:
        path = Path(clip.path)
        n_seg = int(clip.duration_s / self.hop_s)
        if n_seg < 1:
            raise DecodeError(
                f"duration {clip.duration_s} s is below one {self.hop_s} s hop")
        if path.is_dir():
            frames = self._dir_segments(path, clip.start_s, n_seg)
        else:
            frames = self._file_segments(path, clip.start_s, n_seg)
        return np.stack(frames)

    def _pool(self, gray: np.ndarray) -> np.ndarray:
        small = cv2.resize(gray, (_SIDE, _SIDE), interpolation=cv2.INTER_AREA)
        return small.reshape(-1) / 255.0

    def _dir_segments(self, path, start_s, n_seg):
        files = sorted(p for p in path.iterdir()
                       if p.suffix.lower() in _IMAGE_SUFFIXES)
        first = int(round(start_s))
        if first + n_seg > len(files):
            raise DecodeError(
                f"directory holds {len(files)} frames, need "
                f"{first + n_seg}")
        rows = []
        for p in files[first:first + n_seg]:
            gray = cv2.imread(str(p), cv2.IMREAD_GRAYSCALE)
            if gray is None:
                raise DecodeError(f"cannot read frame {p.name}")
            rows.append(self._pool(gray.astype(np.float64)))
        return rows

    def _file_segments(self, path, start_s, n_seg):
        cap = cv2.VideoCapture(str(path))
        try:
            if not cap.isOpened():
                raise DecodeError("cannot open video")
            fps = cap.get(cv2.CAP_PROP_FPS)
            if not fps or fps <= 0:
                raise DecodeError("video reports no frame rate")
            sums = np.zeros((n_seg, self.dim))
            counts = np.zeros(n_seg, dtype=np.int64)
            i = 0
            while True:
                ok, frame = cap.read()
                if not ok:
                    break
                t = i / fps
                i += 1
                seg = int((t - start_s) / self.hop_s) if t >= start_s else -1
                if seg >= n_seg:
                    break
                if seg >= 0:
                    gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
                    sums[seg] += self._pool(gray.astype(np.float64))
                    counts[seg] += 1
        finally:
            cap.release()
        if (counts == 0).any():
            empty = int(np.argmax(counts == 0))
            raise DecodeError(f"no frames decoded for segment {empty}")
        return list(sums / counts[:, None])


def _tokens(tag: str) -> list[str]:
    return re.findall(r"[a-z]+", tag.lower())


class HashVecEncoder:
    """Word vectors drawn from a hash of the word itself.

    Every alphabetic token is in vocabulary, so the all-OOV error can
    only fire for tags with no alphabetic content at all.
    """

    id = "hashvec"
    dim = TEXT_DIM

    def row(self, tag: str) -> np.ndarray:
        vecs = [self._vec(w) for w in _tokens(tag)]
        if not vecs:
            raise VocabularyError(f"no in-vocabulary words in tag {tag!r}")
        return np.mean(vecs, axis=0)

    def _vec(self, word: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(word.encode()).digest()[:8],
                              "little")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self.dim) / np.sqrt(self.dim)


class WordVecFileEncoder:
    """Word vectors read from a text-format table, one word per line."""

    def __init__(self, path: str | Path):
        path = Path(path)
        if not path.is_file():
            raise ExtractError(f"no such file: {path}")
        self.id = f"word2vec:{path}"
        self._table: dict[str, np.ndarray] = {}
        dim = None
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                # a leading "count dim" line is permitted and skipped
                if dim is None and len(parts) == 2 and \
                        all(p.lstrip("-").isdigit() for p in parts):
                    continue
                word, values = parts[0].lower(), parts[1:]
                try:
                    vec = np.array([float(v) for v in values])
                except ValueError as e:
                    raise ExtractError(
                        f"{path}: bad vector for {word!r}: {e}") from e
                if dim is None:
                    dim = vec.shape[0]
                elif vec.shape[0] != dim:
                    raise ExtractError(
                        f"{path}: {word!r} has {vec.shape[0]} values, "
                        f"expected {dim}")
                self._table[word] = vec
        if not self._table or not dim:
            raise ExtractError(f"{path}: no word vectors found")
        self.dim = dim

    def row(self, tag: str) -> np.ndarray:
        vecs = [self._table[w] for w in _tokens(tag) if w in self._table]
        if not vecs:
            raise VocabularyError(f"no in-vocabulary words in tag {tag!r}")
        return np.mean(vecs, axis=0)


def audio_encoder(encoder_id: str):
    if encoder_id == LogMelEncoder.id:
        return LogMelEncoder()
    raise EncoderUnavailableError(f"unknown audio encoder {encoder_id!r}")


def video_encoder(encoder_id: str):
    if encoder_id == FrameStatsEncoder.id:
        return FrameStatsEncoder()
    raise EncoderUnavailableError(f"unknown video encoder {encoder_id!r}")


def text_encoder(encoder_id: str):
    if encoder_id == HashVecEncoder.id:
        return HashVecEncoder()
    if encoder_id.startswith("word2vec:"):
        return WordVecFileEncoder(encoder_id.split(":", 1)[1])
    raise EncoderUnavailableError(f"unknown text encoder {encoder_id!r}")
