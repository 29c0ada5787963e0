"""Distribution metrics over embedding sets.

The Frechet family differs only in provenance and input wiring:

* FD / FAD      audio vs reference audio (label tracks embedding source)
* FAVD          generated audio vs reference video embeddings
* FATD          generated audio vs reference text embeddings
* FA(VT)D      generated audio vs the rowwise mean of video and text

plus the probability-space metrics IS (inception score) and paired KL.
Dimension mismatches across modalities are reconciled by a ProjectionSpec
adapter before fitting; the adapter actually applied is recorded in the
report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embedset import EmbeddingSet, ProjectionSpec, average_sets, project
from .errors import DataError
from .gaussian_stats import fit, frechet

METRICS = ("FD", "FAD", "FAVD", "FATD", "FAVTD", "IS", "KL")
FRECHET_FAMILY = ("FD", "FAD", "FAVD", "FATD", "FAVTD")
KL_DIRECTIONS = ("ref_to_gen", "gen_to_ref")
PROB_FLOOR = 1e-12
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class MetricReport:
    metric: str
    value: float
    n_a: int
    n_b: int
    adapter: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise DataError(f"unknown metric {self.metric!r}")
        if not np.isfinite(self.value):
            raise DataError(f"{self.metric} value is not finite")
        if self.metric in FRECHET_FAMILY and self.value < 0:
            raise DataError(f"{self.metric} must be >= 0, got {self.value}")
        if self.metric == "IS" and self.value < 1.0 - 1e-9:
            raise DataError(f"IS must be >= 1, got {self.value}")
        if self.metric == "KL" and self.value < -1e-12:
            raise DataError(f"KL must be >= 0, got {self.value}")

    def to_json_line(self) -> str:
        return json.dumps({"metric": self.metric, "value": self.value,
                           "n_a": self.n_a, "n_b": self.n_b,
                           "adapter": self.adapter, "seed": self.seed})


def format_table(reports: list[MetricReport]) -> str:
    """Aligned human-readable table, values at 4 decimals."""
    headers = ("metric", "value", "n_a", "n_b", "adapter", "seed")
    rows = [(r.metric, f"{r.value:.4f}", str(r.n_a), str(r.n_b),
             r.adapter or "-", "-" if r.seed is None else str(r.seed))
            for r in reports]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    return "\n".join([line(headers)] + [line(r) for r in rows])


def _reconcile(sets: list[EmbeddingSet], adapter: ProjectionSpec | None
               ) -> tuple[list[EmbeddingSet], str]:
    """Bring all sets to one dimension; returns the applied descriptor.

    pad_truncate without an explicit target narrows the wider sets to the
    smallest dim present.  A matrix adapter maps any set at its input dim
    to its output dim; sets already at the output dim pass through.
    """
    if adapter is None:
        adapter = ProjectionSpec("pad_truncate")
    if adapter.kind == "matrix":
        d_in, d_out = adapter.matrix.shape
        out = []
        for s in sets:
            if s.dim == d_out:
                out.append(s)
            elif s.dim == d_in:
                out.append(project(s, adapter))
            else:
                raise DataError(
                    f"adapter {adapter.describe()} cannot reconcile dim {s.dim}")
        return out, adapter.describe()
    target = adapter.target_dim
    if target is None:
        target = min(s.dim for s in sets)
    resolved = ProjectionSpec("pad_truncate", target_dim=int(target))
    return [project(s, resolved) for s in sets], resolved.describe()


def frechet_sets(a: EmbeddingSet, b: EmbeddingSet, metric: str | None = None,
                 seed: int | None = None) -> MetricReport:
    """Frechet distance between Gaussian fits of two embedding sets.

    The FD/FAD label records provenance only: FAD when both sets carry
    audio embeddings, FD otherwise.
    """
    if a.dim != b.dim:
        raise DataError(f"dim mismatch: {a.dim} vs {b.dim}")
    if a.count < 2 or b.count < 2:
        raise DataError(
            f"need at least 2 rows per set, got {a.count} and {b.count}")
    if metric is None:
        metric = "FAD" if (a.modality == b.modality == "audio") else "FD"
    value = frechet(fit(a), fit(b))
    return MetricReport(metric, value, a.count, b.count, seed=seed)


def _cross_modal(metric: str, audio: EmbeddingSet, other: EmbeddingSet,
                 adapter: ProjectionSpec | None, seed: int | None) -> MetricReport:
    (a, o), desc = _reconcile([audio, other], adapter)
    base = frechet_sets(a, o, metric=metric, seed=seed)
    return MetricReport(metric, base.value, base.n_a, base.n_b,
                        adapter=desc, seed=seed)


def favd(audio: EmbeddingSet, video: EmbeddingSet,
         adapter: ProjectionSpec | None = None,
         seed: int | None = None) -> MetricReport:
    """Generated-audio distribution against reference-video distribution."""
    return _cross_modal("FAVD", audio, video, adapter, seed)


def fatd(audio: EmbeddingSet, text: EmbeddingSet,
         adapter: ProjectionSpec | None = None,
         seed: int | None = None) -> MetricReport:
    """Generated-audio distribution against reference-text distribution."""
    return _cross_modal("FATD", audio, text, adapter, seed)


def favtd(audio: EmbeddingSet, video: EmbeddingSet, text: EmbeddingSet,
          adapter: ProjectionSpec | None = None,
          seed: int | None = None) -> MetricReport:
    """Audio against the rowwise mean of paired video and text embeddings."""
    (a, v, t), desc = _reconcile([audio, video, text], adapter)
    fused = average_sets(v, t)
    base = frechet_sets(a, fused, metric="FAVTD", seed=seed)
    return MetricReport("FAVTD", base.value, base.n_a, base.n_b,
                        adapter=desc, seed=seed)


def _as_distributions(emb: EmbeddingSet, name: str) -> np.ndarray:
    """Validate rows as probability vectors and renormalize exactly to 1."""
    p = emb.data.astype(np.float64)
    if p.size == 0:
        raise DataError(f"{name}: empty probability set")
    if np.any(p < 0):
        raise DataError(f"{name}: negative probability entries")
    sums = p.sum(axis=1)
    if np.any(sums == 0):
        raise DataError(f"{name}: row sums to zero")
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        worst = float(np.abs(sums - 1.0).max())
        raise DataError(
            f"{name}: row sums deviate from 1 by {worst:.3e} (> {ROW_SUM_TOL})")
    return p / sums[:, None]


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # 0 * log(anything) contributes exactly 0; log arguments floored
    logs = np.log(np.maximum(p, PROB_FLOOR)) - np.log(np.maximum(q, PROB_FLOOR))
    return np.where(p > 0, p * logs, 0.0).sum(axis=1)


def inception_score(probs: EmbeddingSet, splits: int = 1,
                    seed: int | None = None) -> MetricReport:
    """exp(mean KL of per-row distributions against the split marginal),
    averaged over contiguous splits.  Natural log throughout."""
    if splits < 1:
        raise DataError("splits must be >= 1")
    p = _as_distributions(probs, "probs")
    if p.shape[0] < splits:
        raise DataError(f"{p.shape[0]} rows cannot fill {splits} splits")
    scores = []
    for part in np.array_split(p, splits):
        marginal = part.mean(axis=0)
        scores.append(np.exp(_kl_rows(part, marginal[None, :]).mean()))
    value = float(np.mean(scores))
    return MetricReport("IS", value, probs.count, probs.count, seed=seed)


def paired_kl(ref_probs: EmbeddingSet, gen_probs: EmbeddingSet,
              direction: str = "ref_to_gen",
              seed: int | None = None) -> MetricReport:
    """Mean rowwise KL divergence between paired probability sets."""
    if direction not in KL_DIRECTIONS:
        raise DataError(f"unknown direction {direction!r}")
    if ref_probs.count != gen_probs.count or ref_probs.dim != gen_probs.dim:
        raise DataError(
            f"shape mismatch: {ref_probs.count}x{ref_probs.dim} vs "
            f"{gen_probs.count}x{gen_probs.dim}")
    ref = _as_distributions(ref_probs, "ref_probs")
    gen = _as_distributions(gen_probs, "gen_probs")
    p, q = (ref, gen) if direction == "ref_to_gen" else (gen, ref)
    value = float(_kl_rows(p, q).mean())
    if -1e-12 < value < 0.0:
        value = 0.0
    return MetricReport("KL", value, ref_probs.count, gen_probs.count, seed=seed)
