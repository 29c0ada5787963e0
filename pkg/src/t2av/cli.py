"""Command-line surface for the evaluation engine.

One subcommand per concept: `stats`, `frechet`, `metric`, `is`, `kl`,
`mech`, `bench`, `synth`.  An optional JSON config file supplies any
flag value plus model and population knobs; explicit flags win.  Exit
codes: 0 success, 1 usage, 2 data or format problem, 3 numerical
failure.  Results go to stdout (or --out); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedset import (
    EmbeddingSet,
    ProjectionSpec,
    read_embeddings,
    write_embeddings,
)
from .errors import DataError, FormatError, NumericalError
from .gaussian_stats import fit_partitioned
from .mechanism import (
    AttentionConfig,
    DDPM_STEPS,
    DEFAULT_DEPTH,
    DEFAULT_HEADS,
    DEFAULT_TEMPERATURE,
    DiffusionSchedule,
    FeatureSeq,
    VCLAPConfig,
    ddpm_forward,
    ddpm_loss,
    multi_head_stack,
    vclap_grad_check,
    vclap_loss,
)
from .metrics import (
    MetricReport,
    _reconcile,
    fatd,
    favd,
    favtd,
    format_table,
    frechet_sets,
    inception_score,
    paired_kl,
)
from .simbench import (
    DEFAULT_GRID,
    PopulationSpec,
    ValidationReport,
    gen_population,
    run_temporal_validation,
    run_visual_validation,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

FORMATS = ("json", "csv", "table")

_STATS_PARTS = 16

# every key a JSON config file may set; flag spellings use hyphens,
# config keys use the underscore form
_CONFIG_KEYS = frozenset({
    "a", "b", "audio", "video", "text", "adapter", "splits", "direction",
    "grid", "seed", "seeds", "out", "format", "threads", "norm",
    "n_clips", "segments", "dim", "latent_dim", "noise_scale",
    "mismatch_mode", "shift_k", "heads", "depth", "residual",
    "temperature", "epsilon", "batch", "step",
})

_METRIC_REPORT_COLUMNS = ("metric", "value", "n_a", "n_b", "adapter", "seed")


class UsageError(Exception):
    """Flag combination or value problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad argv; the exit-code contract reserves 2
    # for data errors
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")

    # no prefix matching: "--a" must never drift in meaning when a
    # flag starting with "a" is added to a subcommand
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"{value} outside u64 range")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} is not >= 1")
    return value


@dataclass(frozen=True)
class RunConfig:
    command: str
    variant: str | None = None
    a: str | None = None
    b: str | None = None
    audio: str | None = None
    video: str | None = None
    text: str | None = None
    adapter: str | None = None
    splits: int = 1
    direction: str = "ref-gen"
    grid: str | None = None
    seed: int | None = None
    seeds: int = 1
    out: str | None = None
    format: str = "json"
    threads: int | None = None
    norm: str = "l2sq"
    n_clips: int | None = None
    segments: int | None = None
    dim: int | None = None
    latent_dim: int | None = None
    noise_scale: float | None = None
    mismatch_mode: str | None = None
    shift_k: int | None = None
    heads: int | None = None
    depth: int | None = None
    residual: bool = True
    temperature: float = DEFAULT_TEMPERATURE
    epsilon: float = 1e-5
    batch: int | None = None
    step: int | None = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise DataError(f"unknown format {self.format!r}")
        if self.direction not in ("ref-gen", "gen-ref"):
            raise DataError(f"unknown direction {self.direction!r}")
        if self.norm not in ("l2", "l2sq"):
            raise DataError(f"unknown norm {self.norm!r}")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise DataError(f"seed {self.seed} outside u64 range")
        if self.seeds < 1:
            raise DataError("seeds must be >= 1")
        if self.splits < 1:
            raise DataError("splits must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise DataError("threads must be >= 1")


def _load_config_file(path: str) -> dict:
    _require_file(path)
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"config {path} must hold a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise DataError(
            f"config {path} has unknown keys: {', '.join(unknown)}")
    return raw


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.config is not None:
        merged.update(_load_config_file(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    merged["command"] = args.command
    merged["variant"] = getattr(args, "variant", None)
    return RunConfig(**merged)


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    return path


def _read_set(path: str, modality: str = "latent") -> EmbeddingSet:
    return read_embeddings(_require_file(path), modality=modality)


def _parse_adapter(spec: str | None) -> ProjectionSpec | None:
    """`pad` keeps the default pad_truncate behavior; `matrix:<path>`
    loads a D_in x D_out map stored as a T2AVEMB1 file."""
    if spec is None or spec == "pad":
        return None
    if spec.startswith("matrix:"):
        path = spec[len("matrix:"):]
        if not path:
            raise UsageError("adapter matrix path is empty")
        mat = _read_set(path)
        return ProjectionSpec(kind="matrix", matrix=mat.data)
    raise UsageError(f"unknown adapter {spec!r}; expected pad or matrix:<path>")


def _parse_grid(text: str | None):
    if text is None:
        return DEFAULT_GRID
    cells = []
    for part in text.split(","):
        part = part.strip()
        bits = part.split(":")
        if len(bits) != 2:
            raise UsageError(f"bad grid cell {part!r}; expected true:false")
        try:
            cells.append((int(bits[0]), int(bits[1])))
        except ValueError as exc:
            raise UsageError(f"bad grid cell {part!r}: {exc}") from exc
    return tuple(cells)


# ------------------------------------------------------------------ rendering

def _cell_text(value, decimals: int | None) -> str:
    if value is None:
        return "-" if decimals is not None else ""
    if isinstance(value, float):
        return f"{value:.4f}" if decimals is not None else repr(value)
    return str(value)


def _rows_json(columns, rows) -> str:
    return "\n".join(
        json.dumps({c: r[c] for c in columns}) for r in rows) + "\n"


def _rows_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    lines += [",".join(_cell_text(r[c], None) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"


def _rows_table(columns, rows) -> str:
    grid = [list(columns)]
    grid += [[_cell_text(r[c], 4) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in grid) for i in range(len(columns))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in grid]
    return "\n".join(lines) + "\n"


def render_report(report, fmt: str) -> str:
    """Render metric reports, validation reports, or generic row dicts.

    json is one object per line; csv a header plus rows; table a
    fixed-width layout with values at 4 decimal places.  Validation
    reports render their table form as the per-cell markdown summary.
    """
    if isinstance(report, ValidationReport):
        if fmt == "csv":
            return report.to_csv()
        if fmt == "table":
            return report.to_markdown()
        columns = ("true_count", "false_count", "metric", "value", "seed")
        rows = [dataclasses.asdict(r) for r in report.rows]
        return _rows_json(columns, rows)
    if isinstance(report, list) and all(
            isinstance(r, MetricReport) for r in report):
        if fmt == "json":
            return "".join(r.to_json_line() + "\n" for r in report)
        if fmt == "table":
            return format_table(report) + "\n"
        rows = [dataclasses.asdict(r) for r in report]
        return _rows_csv(_METRIC_REPORT_COLUMNS, rows)
    rows = list(report)
    if not rows:
        raise DataError("nothing to render")
    columns = tuple(rows[0].keys())
    if fmt == "json":
        return _rows_json(columns, rows)
    if fmt == "csv":
        return _rows_csv(columns, rows)
    return _rows_table(columns, rows)


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)
        print(f"wrote {cfg.out}", file=sys.stderr)


# ------------------------------------------------------------------- commands

def _need(cfg: RunConfig, **paths: str | None) -> None:
    missing = [f"--{flag}" for flag, value in paths.items() if value is None]
    if missing:
        raise UsageError(
            f"{cfg.command} requires {', '.join(missing)}")


def _cmd_stats(cfg: RunConfig) -> None:
    _need(cfg, a=cfg.a)
    if cfg.format != "json":
        raise UsageError("stats output is a JSON object; use --format json")
    emb = _read_set(cfg.a)
    threads = cfg.threads or os.cpu_count() or 1
    # fixed partition count: the merge order, and with it every output
    # bit, must not depend on how many workers happen to run
    stats = fit_partitioned(emb, parts=_STATS_PARTS, max_workers=threads)
    _emit(cfg, stats.to_json() + "\n")


def _with_adapter(report: MetricReport, desc: str | None) -> MetricReport:
    return dataclasses.replace(report, adapter=desc)


def _cmd_frechet(cfg: RunConfig) -> None:
    # the file format records no modality, so the label stays FD rather
    # than guessing FAD
    _need(cfg, a=cfg.a, b=cfg.b)
    a = _read_set(cfg.a)
    b = _read_set(cfg.b)
    if cfg.adapter is None:
        report = frechet_sets(a, b, seed=cfg.seed)
    else:
        (a, b), desc = _reconcile([a, b], _parse_adapter(cfg.adapter))
        report = _with_adapter(frechet_sets(a, b, seed=cfg.seed), desc)
    _emit(cfg, render_report([report], cfg.format))


def _cmd_metric(cfg: RunConfig) -> None:
    adapter = _parse_adapter(cfg.adapter)
    if cfg.variant == "favd":
        _need(cfg, audio=cfg.audio, video=cfg.video)
        report = favd(_read_set(cfg.audio, "audio"),
                      _read_set(cfg.video, "video"), adapter, seed=cfg.seed)
    elif cfg.variant == "fatd":
        _need(cfg, audio=cfg.audio, text=cfg.text)
        report = fatd(_read_set(cfg.audio, "audio"),
                      _read_set(cfg.text, "text"), adapter, seed=cfg.seed)
    else:
        _need(cfg, audio=cfg.audio, video=cfg.video, text=cfg.text)
        report = favtd(_read_set(cfg.audio, "audio"),
                       _read_set(cfg.video, "video"),
                       _read_set(cfg.text, "text"), adapter, seed=cfg.seed)
    _emit(cfg, render_report([report], cfg.format))


def _cmd_is(cfg: RunConfig) -> None:
    _need(cfg, a=cfg.a)
    probs = _read_set(cfg.a, modality="probs")
    report = inception_score(probs, splits=cfg.splits, seed=cfg.seed)
    _emit(cfg, render_report([report], cfg.format))


def _cmd_kl(cfg: RunConfig) -> None:
    _need(cfg, a=cfg.a, b=cfg.b)
    direction = {"ref-gen": "ref_to_gen", "gen-ref": "gen_to_ref"}[cfg.direction]
    report = paired_kl(_read_set(cfg.a, "probs"), _read_set(cfg.b, "probs"),
                       direction=direction, seed=cfg.seed)
    _emit(cfg, render_report([report], cfg.format))


def _clips_of(emb: EmbeddingSet) -> np.ndarray:
    t = emb.segments_per_clip
    if emb.count % t:
        raise DataError(
            f"{emb.count} rows not divisible by {t} segments per clip")
    return emb.data.astype(np.float64).reshape(emb.count // t, t, emb.dim)


def _synth_clips(cfg: RunConfig, rng: np.random.Generator) -> np.ndarray:
    b = cfg.batch or 4
    t = cfg.segments or 5
    d = cfg.dim or 16
    return rng.standard_normal((b, t, d))


def _cmd_mech_attn(cfg: RunConfig) -> None:
    if cfg.a is not None:
        emb = _read_set(cfg.a)
        clips = _clips_of(emb)
        modality = emb.modality
    elif cfg.seed is not None:
        clips = _synth_clips(cfg, np.random.default_rng(cfg.seed))
        modality = "latent"
    else:
        raise UsageError("mech attn needs --a or --seed")
    b, t, d = clips.shape
    heads = cfg.heads or (DEFAULT_HEADS if d % DEFAULT_HEADS == 0 else 1)
    depth = cfg.depth or DEFAULT_DEPTH
    attn = AttentionConfig(heads=heads, depth=depth, dim=d,
                           residual=cfg.residual)
    out = np.stack([multi_head_stack(FeatureSeq(clip), attn).values
                    for clip in clips])
    if cfg.out is not None:
        write_embeddings(
            EmbeddingSet(out.reshape(b * t, d).astype(np.float32), t, modality),
            cfg.out)
        print(f"wrote {cfg.out}", file=sys.stderr)
    row = {"op": "attn", "clips": b, "segments": t, "dim": d, "heads": heads,
           "depth": depth, "residual": cfg.residual, "seed": cfg.seed,
           "output_fro": float(np.linalg.norm(out)), "out": cfg.out}
    sys.stdout.write(render_report([row], cfg.format))


def _cmd_mech_vclap(cfg: RunConfig) -> None:
    if cfg.audio is not None or cfg.text is not None:
        _need(cfg, audio=cfg.audio, text=cfg.text)
        audio = _clips_of(_read_set(cfg.audio, "audio"))
        text = _clips_of(_read_set(cfg.text, "text"))
        if audio.shape != text.shape:
            raise DataError(
                f"audio {audio.shape} and text {text.shape} batches differ")
        b, t, d = audio.shape
        vc = VCLAPConfig(b, t, d, cfg.temperature)
        row = {"op": "vclap", "batch": b, "segments": t, "dim": d,
               "temperature": cfg.temperature,
               "loss": vclap_loss(audio, text, vc), "seed": cfg.seed}
        _emit(cfg, render_report([row], cfg.format))
        return
    if cfg.seed is None:
        raise UsageError("mech vclap needs --audio/--text or --seed")
    rng = np.random.default_rng(cfg.seed)
    audio = _synth_clips(cfg, rng)
    text = _synth_clips(cfg, rng)
    vc = VCLAPConfig(*audio.shape, cfg.temperature)
    err = vclap_grad_check(audio, text, vc, epsilon=cfg.epsilon)
    row = {"max_rel_err": err, "epsilon": cfg.epsilon, "seed": cfg.seed}
    _emit(cfg, render_report([row], cfg.format))


def _cmd_mech_ddpm(cfg: RunConfig) -> None:
    if cfg.a is not None:
        emb = _read_set(cfg.a)
        clips = _clips_of(emb)
        t, modality = emb.segments_per_clip, emb.modality
    elif cfg.seed is not None:
        clips = _synth_clips(cfg, np.random.default_rng(cfg.seed))
        t, modality = clips.shape[1], "latent"
    else:
        raise UsageError("mech ddpm needs --a or --seed")
    seed = 0 if cfg.seed is None else cfg.seed
    # the noise draw reuses the seed stream offset by one so synthetic
    # latents and their noise stay independent
    eps = np.random.default_rng(seed + 1).standard_normal(clips.shape)
    sched = DiffusionSchedule.linear()
    step = DDPM_STEPS // 2 if cfg.step is None else cfg.step
    noised = ddpm_forward(clips, eps, step, sched)
    zero_loss = ddpm_loss(clips, eps, step, sched,
                          lambda z, n, c: np.zeros_like(z), norm=cfg.norm)
    if cfg.out is not None:
        b, _, d = clips.shape
        write_embeddings(
            EmbeddingSet(noised.reshape(b * t, d).astype(np.float32), t,
                         modality), cfg.out)
        print(f"wrote {cfg.out}", file=sys.stderr)
    row = {"op": "ddpm", "step": step, "steps": sched.steps,
           "alpha_bar": float(sched.alpha_bars[step]),
           "zero_pred_loss": zero_loss, "norm": cfg.norm, "seed": seed,
           "out": cfg.out}
    sys.stdout.write(render_report([row], cfg.format))


def _population_spec(cfg: RunConfig, default_mode: str) -> PopulationSpec:
    base = PopulationSpec()
    return PopulationSpec(
        n_clips=cfg.n_clips or base.n_clips,
        segments=cfg.segments or base.segments,
        dim=cfg.dim or base.dim,
        latent_dim=cfg.latent_dim or base.latent_dim,
        noise_scale=base.noise_scale if cfg.noise_scale is None
        else cfg.noise_scale,
        mismatch_mode=cfg.mismatch_mode or default_mode,
        seed=0 if cfg.seed is None else cfg.seed,
        shift_k=cfg.shift_k)


def _cmd_bench(cfg: RunConfig) -> None:
    grid = _parse_grid(cfg.grid)
    if cfg.variant == "visual":
        spec = _population_spec(cfg, "independent_latent")
        report = run_visual_validation(spec, grid=grid, seeds=cfg.seeds)
    else:
        spec = _population_spec(cfg, "temporal_shift_k")
        report = run_temporal_validation(spec, grid=grid, seeds=cfg.seeds)
    _emit(cfg, render_report(report, cfg.format))


def _cmd_synth(cfg: RunConfig) -> None:
    if cfg.out is None:
        raise UsageError("synth requires --out <directory>")
    spec = _population_spec(cfg, "independent_latent")
    audio, video, text, manifest = gen_population(spec)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_embeddings(audio, out / "audio.emb")
    write_embeddings(video, out / "video.emb")
    write_embeddings(text, out / "text.emb")
    manifest.save(out / "population.pairs.json")
    print(f"wrote 4 files to {out}", file=sys.stderr)
    row = {"clips": spec.n_clips, "segments": spec.segments, "dim": spec.dim,
           "mode": spec.mismatch_mode, "seed": spec.seed, "dir": str(out),
           "files": "audio.emb video.emb text.emb population.pairs.json"}
    sys.stdout.write(render_report([row], cfg.format))


_DISPATCH = {
    "stats": _cmd_stats,
    "frechet": _cmd_frechet,
    "metric": _cmd_metric,
    "is": _cmd_is,
    "kl": _cmd_kl,
    "bench": _cmd_bench,
    "synth": _cmd_synth,
}

_MECH_DISPATCH = {
    "attn": _cmd_mech_attn,
    "vclap": _cmd_mech_vclap,
    "ddpm": _cmd_mech_ddpm,
}


def dispatch(cfg: RunConfig) -> int:
    if cfg.command == "mech":
        _MECH_DISPATCH[cfg.variant](cfg)
    else:
        _DISPATCH[cfg.command](cfg)
    return EXIT_OK


# -------------------------------------------------------------------- parsing

def build_parser() -> _Parser:
    parser = _Parser(prog="t2av", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--out", help="write results here instead of stdout")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=_u64)
    common.add_argument("--threads", type=_positive)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common],
                       help="Gaussian moments of an embedding file")
    p.add_argument("--a", help="embedding file")

    p = sub.add_parser("frechet", parents=[common],
                       help="Frechet distance between two embedding files")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--adapter", help="pad or matrix:<path>")

    p = sub.add_parser("metric", parents=[common],
                       help="cross-modal Frechet metrics")
    p.add_argument("variant", choices=("favd", "fatd", "favtd"))
    p.add_argument("--audio")
    p.add_argument("--video")
    p.add_argument("--text")
    p.add_argument("--adapter", help="pad or matrix:<path>")

    p = sub.add_parser("is", parents=[common],
                       help="inception score of a probability file")
    p.add_argument("--a", help="row-stochastic probability file")
    p.add_argument("--splits", type=_positive)

    p = sub.add_parser("kl", parents=[common],
                       help="mean paired KL divergence")
    p.add_argument("--a", help="reference probabilities")
    p.add_argument("--b", help="generated probabilities")
    p.add_argument("--direction", choices=("ref-gen", "gen-ref"))

    p = sub.add_parser("mech", parents=[common],
                       help="alignment mechanism kernels; for attn and "
                            "ddpm, --out receives transformed embeddings")
    p.add_argument("variant", choices=("attn", "vclap", "ddpm"))
    p.add_argument("--a", help="input clips (attn, ddpm)")
    p.add_argument("--audio", help="audio clips (vclap)")
    p.add_argument("--text", help="text clips (vclap)")
    p.add_argument("--norm", choices=("l2", "l2sq"))

    p = sub.add_parser("bench", parents=[common],
                       help="synthetic directional validation")
    p.add_argument("variant", choices=("visual", "temporal"))
    p.add_argument("--grid", help='cells as "true:false,true:false,..."')
    p.add_argument("--seeds", type=_positive)

    sub.add_parser("synth", parents=[common],
                   help="write one synthetic population to --out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_run_config(args)
        return dispatch(cfg)
    except BrokenPipeError:
        # downstream reader (head, less) closed stdout; not an error
        try:
            sys.stdout.close()
        except OSError:
            pass
        return EXIT_OK
    except UsageError as exc:
        print(f"t2av: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, DataError) as exc:
        print(f"t2av: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"t2av: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
