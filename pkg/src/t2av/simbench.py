"""Synthetic populations and directional validation protocols.

A population of paired clips shares one latent per clip: audio, video
and text rows are fixed linear maps of that latent plus isotropic noise,
with a per-segment drift that makes segment index identifiable.  False
pairs draw their audio from an uncurated pool whose latent distribution
is inflated and offset relative to the curated population; a set-level
Frechet metric cannot see marginal-preserving swaps within one
population, so the pool is what carries the direction of the validation
tables.  The three mismatch modes differ in how much pool structure they
keep:

* independent_latent       fresh inflated latent, offset pool mean
* same_class_other_clip    keeps the clip's class mean, redraws the rest
* temporal_shift_k         pad_zero segment shift of the paired audio

Shifting drops the trailing segments and inserts zero rows, which moves
the set marginal; a cyclic shift would be invisible to these metrics.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .embedset import EmbeddingSet, Pair, PairManifest, select_clips
from .errors import DataError
from .metrics import MetricReport, fatd, favd, favtd

MISMATCH_MODES = ("independent_latent", "same_class_other_clip",
                  "temporal_shift_k")
DEFAULT_GRID = ((500, 0), (0, 500), (500, 500), (500, 1000), (1000, 500))

# Population structure shared by all seeds: modality maps, drift, and the
# pool offset direction come from this fixed stream.
_STRUCTURE_SEED = 0x7A2B

CLASS_SHARE = 0.5        # latent variance carried by the class component
CLIPS_PER_CLASS = 10
POOL_SCALE = 1.5         # spread inflation of the uncurated pool
POOL_OFFSET = 1.0        # latent-space mean offset of the pool
DRIFT_SIGMA = 0.5        # per-segment drift, relative to unit signal std
MAP_ALIGN = 0.5          # shared fraction of map variance across modalities
DC_OFFSET = 3.0          # common non-centered embedding offset; zero rows
                         # (from pad_zero shifts) land far outside the cloud

_METRIC_ORDER = ("FAVD", "FATD", "FAVTD")
_DISPLAY = {"FAVD": "FAVD", "FATD": "FATD", "FAVTD": "FA(VT)D"}


@dataclass(frozen=True)
class PopulationSpec:
    n_clips: int = 1500
    segments: int = 5
    dim: int = 8
    latent_dim: int = 4
    noise_scale: float = 0.1
    mismatch_mode: str = "independent_latent"
    seed: int = 0
    # temporal_shift_k only: fixed shift, or None for a fresh draw in
    # [1, T) per clip
    shift_k: int | None = None
    # degenerate testing knob: one map for every modality
    shared_modality_maps: bool = False

    def __post_init__(self):
        if self.n_clips < 1:
            raise DataError("n_clips must be >= 1")
        if self.segments < 1:
            raise DataError("segments must be >= 1")
        if self.dim < 1 or self.latent_dim < 1:
            raise DataError("dim and latent_dim must be >= 1")
        if self.latent_dim > self.dim:
            raise DataError(
                f"latent_dim {self.latent_dim} exceeds dim {self.dim}")
        if not (np.isfinite(self.noise_scale) and self.noise_scale >= 0):
            raise DataError("noise_scale must be finite and >= 0")
        if self.mismatch_mode not in MISMATCH_MODES:
            raise DataError(f"unknown mismatch_mode {self.mismatch_mode!r}")
        if self.shift_k is not None and not 0 <= self.shift_k < self.segments:
            raise DataError(
                f"shift_k {self.shift_k} outside [0, {self.segments})")


@dataclass(frozen=True)
class ValidationRow:
    true_count: int
    false_count: int
    metric: str
    value: float
    seed: int

    def __post_init__(self):
        if self.true_count < 0 or self.false_count < 0:
            raise DataError("pair counts must be >= 0")
        if not np.isfinite(self.value):
            raise DataError("validation value is not finite")


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]

    def to_csv(self) -> str:
        lines = ["true_count,false_count,metric,value,seed"]
        lines += [f"{r.true_count},{r.false_count},{r.metric},{r.value!r},{r.seed}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        """Per-cell means over seeds, one row per (true, false) cell."""
        metrics = [m for m in _METRIC_ORDER
                   if any(r.metric == m for r in self.rows)]
        cells: list[tuple[int, int]] = []
        for r in self.rows:
            cell = (r.true_count, r.false_count)
            if cell not in cells:
                cells.append(cell)
        header = "| True pairs | False pairs | " + " | ".join(
            _DISPLAY[m] for m in metrics) + " |"
        sep = "|" + "---|" * (2 + len(metrics))
        lines = [header, sep]
        for t, f in cells:
            vals = []
            for m in metrics:
                picked = [r.value for r in self.rows
                          if (r.true_count, r.false_count) == (t, f)
                          and r.metric == m]
                vals.append(f"{np.mean(picked):.2f}" if picked else "-")
            lines.append(f"| {t} | {f} | " + " | ".join(vals) + " |")
        return "\n".join(lines) + "\n"


def _structure(spec: PopulationSpec):
    """Seed-independent population structure: modality maps, drift, pool
    offset, and the common non-centered embedding mean.

    Maps share MAP_ALIGN of their variance (the stand-in for cross-modal
    alignment training), so a shared latent produces correlated rows
    across modalities.
    """
    rng = np.random.default_rng(_STRUCTURE_SEED)
    k, d, t = spec.latent_dim, spec.dim, spec.segments
    shared = rng.standard_normal((k, d)) / np.sqrt(k)
    maps = {}
    for modality in ("audio", "video", "text"):
        own = rng.standard_normal((k, d)) / np.sqrt(k)
        maps[modality] = (np.sqrt(MAP_ALIGN) * shared
                          + np.sqrt(1.0 - MAP_ALIGN) * own)
    if spec.shared_modality_maps:
        maps["video"] = maps["audio"]
        maps["text"] = maps["audio"]
    drift = rng.standard_normal((t, k)) * DRIFT_SIGMA
    offset = rng.standard_normal(k)
    offset *= POOL_OFFSET / np.linalg.norm(offset)
    dc = rng.standard_normal(d)
    dc *= DC_OFFSET / np.linalg.norm(dc)
    return maps, drift, offset, dc


def gen_population(spec: PopulationSpec
                   ) -> tuple[EmbeddingSet, EmbeddingSet, EmbeddingSet,
                              PairManifest]:
    """Sample one population: true audio/video/text plus a same-size
    block of mismatch audio appended after the true audio clips.

    Audio clip i of the returned set is the true audio of clip i;
    clip n_clips + i is the mismatch audio for clip i.
    """
    maps, drift, offset, dc = _structure(spec)
    n, t, d, k = spec.n_clips, spec.segments, spec.dim, spec.latent_dim
    sigma = spec.noise_scale
    rng = np.random.default_rng(spec.seed)

    n_classes = max(2, n // CLIPS_PER_CLASS)
    class_of = np.arange(n) % n_classes
    class_means = rng.standard_normal((n_classes, k)) * np.sqrt(CLASS_SHARE)
    clip_part = rng.standard_normal((n, k)) * np.sqrt(1.0 - CLASS_SHARE)
    latent = class_means[class_of] + clip_part          # u ~ N(0, I_k)
    per_segment = latent[:, None, :] + drift[None, :, :]  # (n, T, k)

    def render(modality: str) -> np.ndarray:
        clean = dc + per_segment @ maps[modality]
        noisy = clean + sigma * rng.standard_normal((n, t, d))
        return noisy.reshape(n * t, d).astype(np.float32)

    true_audio = render("audio")
    video = render("video")
    text = render("text")

    shifts = np.zeros(n, dtype=np.int64)
    if spec.mismatch_mode == "temporal_shift_k":
        if spec.shift_k is None:
            if t < 2:
                raise DataError("temporal_shift_k needs segments >= 2")
            shifts = rng.integers(1, t, size=n)
        else:
            shifts[:] = spec.shift_k
        clips = true_audio.reshape(n, t, d)
        false_clips = np.zeros_like(clips)
        for kv in np.unique(shifts):
            mask = shifts == kv
            if kv == 0:
                false_clips[mask] = clips[mask]
            else:
                false_clips[mask, kv:, :] = clips[mask, :t - kv, :]
        false_audio = false_clips.reshape(n * t, d)
    else:
        if spec.mismatch_mode == "independent_latent":
            pool_class = rng.standard_normal((n, k)) * np.sqrt(CLASS_SHARE)
            pool_clip = rng.standard_normal((n, k)) * np.sqrt(1.0 - CLASS_SHARE)
            pool_latent = offset + POOL_SCALE * (pool_class + pool_clip)
        else:  # same_class_other_clip keeps the class mean
            pool_clip = rng.standard_normal((n, k)) * np.sqrt(1.0 - CLASS_SHARE)
            pool_latent = offset + class_means[class_of] + POOL_SCALE * pool_clip
        pool_segments = pool_latent[:, None, :] + drift[None, :, :]
        clean = dc + pool_segments @ maps["audio"]
        noisy = clean + sigma * rng.standard_normal((n, t, d))
        false_audio = noisy.reshape(n * t, d).astype(np.float32)

    audio = EmbeddingSet(np.vstack([true_audio, false_audio]), t, "audio")
    video_set = EmbeddingSet(video, t, "video")
    text_set = EmbeddingSet(text, t, "text")

    pairs = []
    for c in range(n):
        tag = f"class{class_of[c]:03d}"
        pairs.append(Pair(f"clip{c:05d}", c * t, c * t, c * t,
                          "true_pair", 0.0, tag))
    for c in range(n):
        tag = f"class{class_of[c]:03d}"
        pairs.append(Pair(f"clip{c:05d}/false", (n + c) * t, c * t, c * t,
                          "false_pair", float(shifts[c]), tag))
    manifest = PairManifest(pairs)
    manifest.validate_against(audio, video_set, text_set)
    return audio, video_set, text_set, manifest


def _cell_sets(spec: PopulationSpec, audio: EmbeddingSet, video: EmbeddingSet,
               text: EmbeddingSet, true_count: int, false_count: int):
    """Mix for one grid cell: true pairs use clips [0, t); false pairs
    take mismatch audio against the videos of clips [t, t+f)."""
    n = spec.n_clips
    if true_count + false_count > n:
        raise DataError(
            f"cell ({true_count},{false_count}) needs {true_count + false_count} "
            f"clips, population has {n}")
    if (true_count + false_count) * spec.segments < 2:
        raise DataError("cell too small to fit a covariance")
    audio_clips = list(range(true_count)) + [
        n + c for c in range(true_count, true_count + false_count)]
    ref_clips = list(range(true_count + false_count))
    return (select_clips(audio, audio_clips),
            select_clips(video, ref_clips),
            select_clips(text, ref_clips))


def _run_cells(spec: PopulationSpec, grid, metrics, seeds: int):
    grid = [(int(a), int(b)) for a, b in grid]
    if not grid:
        raise DataError("empty grid")
    values: dict[tuple[int, int, int], dict[str, float]] = {}
    for offset in range(seeds):
        seeded = dataclasses.replace(spec, seed=spec.seed + offset)
        audio, video, text, _ = gen_population(seeded)
        for cell in grid:
            key = (cell[0], cell[1], seeded.seed)
            if key in values:
                continue
            a, v, x = _cell_sets(seeded, audio, video, text, *cell)
            out = {}
            if "FAVD" in metrics:
                out["FAVD"] = favd(a, v, seed=seeded.seed).value
            if "FATD" in metrics:
                out["FATD"] = fatd(a, x, seed=seeded.seed).value
            if "FAVTD" in metrics:
                out["FAVTD"] = favtd(a, v, x, seed=seeded.seed).value
            values[key] = out
    rows = []
    for cell in grid:
        for offset in range(seeds):
            key = (cell[0], cell[1], spec.seed + offset)
            for metric in _METRIC_ORDER:
                if metric in values[key]:
                    rows.append(ValidationRow(cell[0], cell[1], metric,
                                              values[key][metric], key[2]))
    return ValidationReport(tuple(rows))


def run_visual_validation(spec: PopulationSpec, grid=None,
                          seeds: int = 1) -> ValidationReport:
    """FAVD, FATD and FA(VT)D per grid cell over consecutive seeds.

    Row order is (grid cell, seed, metric) regardless of how the seeds
    were evaluated.
    """
    if spec.mismatch_mode == "temporal_shift_k":
        raise DataError(
            "visual validation needs a latent mismatch mode, not "
            "temporal_shift_k")
    return _run_cells(spec, DEFAULT_GRID if grid is None else grid,
                      ("FAVD", "FATD", "FAVTD"), seeds)


def run_temporal_validation(spec: PopulationSpec, grid=None,
                            seeds: int = 1) -> ValidationReport:
    """FAVD per grid cell with shift or class mismatch audio."""
    if spec.mismatch_mode == "independent_latent":
        raise DataError(
            "temporal validation compares shift or class mismatches; "
            "pick temporal_shift_k or same_class_other_clip")
    if spec.mismatch_mode == "temporal_shift_k" and spec.segments < 2:
        raise DataError("temporal_shift_k needs segments >= 2")
    return _run_cells(spec, DEFAULT_GRID if grid is None else grid,
                      ("FAVD",), seeds)
