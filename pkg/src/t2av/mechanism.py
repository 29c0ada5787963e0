"""Deterministic reference kernels for the generation-model math.

Four families, all pure functions over numpy arrays:

* temporal self-attention over per-second feature rows, no learned
  projections, plus the multi-head / multi-layer stack
* dual residual fusion of text and video feature sequences
* the temporal contrastive (VCLAP) loss with an analytic-vs-numeric
  gradient check
* the forward diffusion process and its noise-prediction objective

Attention accumulates weighted rows in a canonical order (sorted by
weight, then row content), so outputs are bitwise invariant under
key/value permutation rather than merely close.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError

DEFAULT_TEMPERATURE = 0.07
DEFAULT_HEADS = 8
DEFAULT_DEPTH = 4
DEFAULT_DIM = 768
DDPM_STEPS = 1000
BETA_START = 1e-4
BETA_END = 0.02
NORMS = ("l2sq", "l2")


@dataclass(frozen=True)
class FeatureSeq:
    """T x D sequence of per-segment feature rows."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"feature sequence must be 2-D, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"feature sequence must be nonempty, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("feature sequence contains NaN or Inf")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def timesteps(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class VCLAPConfig:
    batch: int
    timesteps: int
    dim: int
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.batch < 2:
            raise DataError("batch must be >= 2")
        if self.timesteps < 1 or self.dim < 1:
            raise DataError("timesteps and dim must be >= 1")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise DataError("temperature must be a positive finite real")


@dataclass(frozen=True)
class AttentionConfig:
    heads: int = DEFAULT_HEADS
    depth: int = DEFAULT_DEPTH
    dim: int = DEFAULT_DIM
    residual: bool = True

    def __post_init__(self):
        if self.heads < 1 or self.depth < 1 or self.dim < 1:
            raise DataError("heads, depth and dim must be >= 1")
        if self.dim % self.heads:
            raise DataError(f"dim {self.dim} not divisible by {self.heads} heads")


@dataclass(frozen=True)
class LatentSpec:
    """Shape contract for the compressed audio latent: C x T/r x F/r."""

    channels: int
    time: int
    freq: int
    compression: int

    def __post_init__(self):
        if min(self.channels, self.time, self.freq, self.compression) < 1:
            raise DataError("all latent spec fields must be positive")
        if self.time % self.compression or self.freq % self.compression:
            raise DataError(
                f"compression {self.compression} must divide time {self.time} "
                f"and freq {self.freq}")

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        r = self.compression
        return (self.channels, self.time // r, self.freq // r)


@dataclass(frozen=True)
class DiffusionSchedule:
    steps: int
    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        bars = np.asarray(self.alpha_bars, dtype=np.float64)
        if betas.shape != (self.steps,) or bars.shape != (self.steps,):
            raise DataError("schedule length does not match steps")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise DataError("betas must lie in (0, 1)")
        if np.any(bars <= 0) or np.any(bars >= 1):
            raise DataError("alpha_bars must lie in (0, 1)")
        if np.any(np.diff(bars) >= 0):
            raise DataError("alpha_bars must be strictly decreasing")
        if not np.allclose(bars, np.cumprod(1.0 - betas), rtol=1e-12, atol=0):
            raise DataError("alpha_bars inconsistent with betas")
        for name, arr in (("betas", betas), ("alpha_bars", bars)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def linear(cls, steps: int = DDPM_STEPS, beta_start: float = BETA_START,
               beta_end: float = BETA_END) -> "DiffusionSchedule":
        if steps < 1:
            raise DataError("steps must be >= 1")
        betas = np.linspace(beta_start, beta_end, steps)
        return cls(steps, betas, np.cumprod(1.0 - betas))


# ------------------------------------------------------------------ attention

def _mix_canonical(exp_weights: np.ndarray, rows: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum weights and weighted rows in an order determined only by the
    multiset of (weight, row) items: sort by weight, ties broken by row
    content.  Fully identical items are interchangeable, so the result is
    bitwise invariant under input permutation."""
    keys = tuple(rows[:, j] for j in range(rows.shape[1] - 1, -1, -1))
    order = np.lexsort(keys + (exp_weights,))
    e = exp_weights[order]
    return float(e.sum()), e @ rows[order]


def _attend(values: np.ndarray, scale: float) -> np.ndarray:
    logits = values @ values.T / scale
    out = np.empty_like(values)
    for i in range(values.shape[0]):
        e = np.exp(logits[i] - logits[i].max())
        denom, mixed = _mix_canonical(e, values)
        out[i] = mixed / denom
    return out


def temporal_self_attention(seq: FeatureSeq) -> FeatureSeq:
    """out_i = softmax(F_i F^T / sqrt(D)) F, rowwise over the sequence."""
    return FeatureSeq(_attend(seq.values, math.sqrt(seq.dim)))


def attention_weights(seq: FeatureSeq) -> np.ndarray:
    """The T x T softmax weight matrix behind temporal_self_attention."""
    v = seq.values
    logits = v @ v.T / math.sqrt(seq.dim)
    out = np.empty_like(logits)
    for i in range(v.shape[0]):
        e = np.exp(logits[i] - logits[i].max())
        denom, _ = _mix_canonical(e, v)
        out[i] = e / denom
    return out


def multi_head_stack(seq: FeatureSeq, cfg: AttentionConfig) -> FeatureSeq:
    """cfg.depth layers of headwise attention over channel slices.

    Each head attends over its own D/h slice with scale sqrt(D/h);
    slices concatenate back and the layer adds a residual connection
    when cfg.residual.
    """
    if seq.dim != cfg.dim:
        raise DataError(f"sequence dim {seq.dim} does not match cfg dim {cfg.dim}")
    slice_dim = cfg.dim // cfg.heads
    scale = math.sqrt(slice_dim)
    x = seq.values
    for _ in range(cfg.depth):
        y = np.empty_like(x)
        for h in range(cfg.heads):
            lo = h * slice_dim
            y[:, lo:lo + slice_dim] = _attend(x[:, lo:lo + slice_dim], scale)
        x = x + y if cfg.residual else y
    return FeatureSeq(x)


# --------------------------------------------------------------------- fusion

@dataclass(frozen=True)
class FusionParams:
    """Affine map parameters for the two residual branches."""

    w_text: np.ndarray
    b_text: np.ndarray
    w_video: np.ndarray
    b_video: np.ndarray

    def __post_init__(self):
        w_text = np.asarray(self.w_text, dtype=np.float64)
        d = w_text.shape[0] if w_text.ndim == 2 else -1
        for name in ("w_text", "w_video"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (d, d):
                raise DataError(f"{name} must be square D x D")
            object.__setattr__(self, name, arr)
        for name in ("b_text", "b_video"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (d,):
                raise DataError(f"{name} must have shape (D,)")
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, dim: int) -> "FusionParams":
        return cls(np.zeros((dim, dim)), np.zeros(dim),
                   np.zeros((dim, dim)), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.w_text.shape[0]


def dual_residual_fusion(text: FeatureSeq, video: FeatureSeq,
                         params: FusionParams) -> FeatureSeq:
    """(text + tanh(text W_t + b_t)) + (video + tanh(video W_v + b_v)).

    With zero parameters this reduces to the elementwise sum.
    """
    if (text.timesteps, text.dim) != (video.timesteps, video.dim):
        raise DataError(
            f"shape mismatch: {text.values.shape} vs {video.values.shape}")
    if params.dim != text.dim:
        raise DataError(f"params dim {params.dim} does not match {text.dim}")
    gt = np.tanh(text.values @ params.w_text + params.b_text)
    gv = np.tanh(video.values @ params.w_video + params.b_video)
    return FeatureSeq((text.values + gt) + (video.values + gv))


# ---------------------------------------------------------------------- vclap

def _check_batch(x: np.ndarray, cfg: VCLAPConfig, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    want = (cfg.batch, cfg.timesteps, cfg.dim)
    if arr.shape != want:
        raise DataError(f"{name} shape {arr.shape} does not match {want}")
    if not np.isfinite(arr).all():
        raise DataError(f"{name} contains NaN or Inf")
    return arr


def _unit_rows(x: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(x, axis=2)
    if np.any(norms == 0):
        raise DataError(f"{name} has a zero-norm vector")
    return x / norms[:, :, None]


def vclap_logits(audio: np.ndarray, text: np.ndarray,
                 cfg: VCLAPConfig) -> np.ndarray:
    """Temperature-scaled cosine similarities, shape (B, B, T).

    Entry [b, m, i] compares audio of item b with text of item m at
    timestep i; the candidate axis is axis 1.
    """
    a = _unit_rows(_check_batch(audio, cfg, "audio"), "audio")
    t = _unit_rows(_check_batch(text, cfg, "text"), "text")
    return np.einsum("bid,mid->bmi", a, t) / cfg.temperature


def vclap_loss_from_logits(logits: np.ndarray) -> float:
    """Contrastive loss over a (B, B, T) logit tensor, normalized by 1/B.

    The outer normalization follows the loss definition literally: 1/B,
    not 1/(B*T), so the value scales with T.
    """
    if logits.ndim != 3 or logits.shape[0] != logits.shape[1]:
        raise DataError(f"logits must be (B, B, T), got {logits.shape}")
    b = logits.shape[0]
    m = logits.max(axis=1)
    lse = np.log(np.exp(logits - m[:, None, :]).sum(axis=1))
    diag = logits[np.arange(b), np.arange(b), :]
    # grouped so that uniform logits give exactly ln B per term
    terms = np.maximum((m - diag) + lse, 0.0)
    return float(terms.sum() / b)


def vclap_loss(audio: np.ndarray, text: np.ndarray, cfg: VCLAPConfig) -> float:
    """Temporal contrastive loss between paired audio and text batches."""
    return vclap_loss_from_logits(vclap_logits(audio, text, cfg))


def vclap_grad(logits: np.ndarray) -> np.ndarray:
    """Analytic gradient of vclap_loss_from_logits: (softmax - indicator)/B."""
    if logits.ndim != 3 or logits.shape[0] != logits.shape[1]:
        raise DataError(f"logits must be (B, B, T), got {logits.shape}")
    b = logits.shape[0]
    z = np.exp(logits - logits.max(axis=1)[:, None, :])
    p = z / z.sum(axis=1)[:, None, :]
    return (p - np.eye(b)[:, :, None]) / b


def vclap_grad_check(audio: np.ndarray, text: np.ndarray, cfg: VCLAPConfig,
                     epsilon: float = 1e-5) -> float:
    """Max relative error of the analytic gradient against central
    finite differences over every logit entry.

    Errors are taken relative to the largest gradient magnitude (not
    entrywise): saturated softmax entries have true gradients below the
    roundoff of the differenced loss, where an entrywise ratio would
    only amplify noise.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise DataError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    logits = vclap_logits(audio, text, cfg)
    analytic = vclap_grad(logits)
    scale = max(float(np.abs(analytic).max()), 1e-12)
    worst = 0.0
    for idx in np.ndindex(logits.shape):
        bumped = logits.copy()
        bumped[idx] += epsilon
        hi = vclap_loss_from_logits(bumped)
        bumped[idx] -= 2.0 * epsilon
        lo = vclap_loss_from_logits(bumped)
        numeric = (hi - lo) / (2.0 * epsilon)
        denom = max(scale, abs(numeric), abs(analytic[idx]))
        worst = max(worst, abs(numeric - analytic[idx]) / denom)
    return worst


# ------------------------------------------------------------------ diffusion

def ddpm_forward(z0: np.ndarray, eps: np.ndarray, n: int,
                 sched: DiffusionSchedule) -> np.ndarray:
    """Noised latent z_n = sqrt(abar_n) z0 + sqrt(1 - abar_n) eps."""
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise DataError(f"shape mismatch: {z0.shape} vs {eps.shape}")
    if not 0 <= n < sched.steps:
        raise DataError(f"step {n} outside [0, {sched.steps})")
    abar = sched.alpha_bars[n]
    return math.sqrt(abar) * z0 + math.sqrt(1.0 - abar) * eps


def ddpm_loss(z0: np.ndarray, eps: np.ndarray, n: int, sched: DiffusionSchedule,
              predictor: Callable[[np.ndarray, int, object], np.ndarray],
              condition: object = None, norm: str = "l2sq") -> float:
    """Noise-prediction objective at one step.

    "l2sq" (default) is the mean squared error over elements; "l2" the
    unsquared Frobenius norm of the residual.
    """
    if norm not in NORMS:
        raise DataError(f"unknown norm {norm!r}")
    z_n = ddpm_forward(z0, eps, n, sched)
    pred = np.asarray(predictor(z_n, n, condition), dtype=np.float64)
    if pred.shape != z_n.shape:
        raise DataError(
            f"predictor returned shape {pred.shape}, expected {z_n.shape}")
    resid = np.asarray(eps, dtype=np.float64) - pred
    if norm == "l2sq":
        return float(np.mean(resid * resid))
    return float(np.linalg.norm(resid.ravel()))
