"""Gaussian summary statistics and the Frechet distance between Gaussians.

Every metric in this package reduces to the distance between two Gaussian
fits::

    d^2 = ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})

The cross term is evaluated through the symmetric equivalent
Tr((S1^{1/2} S2 S1^{1/2})^{1/2}), which only ever takes square roots of
symmetric PSD matrices.  The eigensolver is a cyclic Jacobi iteration
with parallel (round-robin) ordering; rotations on disjoint index pairs
commute exactly, so each round applies its plane rotations in one
vectorized step.

Statistics accumulate in float64 with a two-pass centered co-moment and
merge via the pairwise update

    M = M_a + M_b + (n_a n_b / n) * outer(delta, delta),  delta = mu_b - mu_a

which makes partitioned accumulation agree with the serial fit to
floating-point roundoff regardless of chunking.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .embedset import EmbeddingSet
from .errors import DataError, NumericalError

# Accumulation chunk: keeps the float64 working copy of large float32
# inputs bounded (~64 MB at D=128).
_CHUNK_ROWS = 65536

EIG_RESIDUAL_TOL = 1e-8
EIG_SYMMETRY_TOL = 1e-8
EIG_MAX_SWEEPS_PER_DIM = 100
PSD_CLAMP_REL = 1e-8
DISTANCE_CLAMP = -1e-6


@dataclass(frozen=True)
class GaussianStats:
    """(mean, co-moment, count) summary of an embedding set.

    ``co_moment`` is the sum of outer products of centered rows; the
    unbiased covariance (divisor N-1) is derived from it.  Instances are
    mergeable, with count 0 acting as the identity element.
    """

    dim: int
    count: int
    mean: np.ndarray       # (D,) float64
    co_moment: np.ndarray  # (D, D) float64, symmetric

    def __post_init__(self):
        if self.mean.shape != (self.dim,):
            raise DataError("mean shape does not match dim")
        if self.co_moment.shape != (self.dim, self.dim):
            raise DataError("co_moment shape does not match dim")

    @classmethod
    def empty(cls, dim: int) -> "GaussianStats":
        return cls(dim, 0, np.zeros(dim), np.zeros((dim, dim)))

    @classmethod
    def from_moments(cls, mean, cov, count: int = 2) -> "GaussianStats":
        """Build stats directly from a mean vector and covariance matrix."""
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        if count < 2:
            raise DataError("count must be >= 2 for a defined covariance")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DataError("covariance shape does not match mean")
        return cls(d, count, mean, cov * (count - 1))

    @property
    def cov(self) -> np.ndarray:
        """Unbiased sample covariance (divisor N-1); requires count >= 2."""
        if self.count < 2:
            raise DataError("covariance undefined for count < 2")
        return self.co_moment / (self.count - 1)

    def to_json(self) -> str:
        """Serialize as {dim, count, mean, cov} with 17 significant digits."""
        def fmt(x: float) -> str:
            return format(float(x), ".17g")

        mean = "[" + ", ".join(fmt(x) for x in self.mean) + "]"
        cov = "[" + ", ".join(
            "[" + ", ".join(fmt(x) for x in row) + "]" for row in self.cov) + "]"
        return (f'{{"dim": {self.dim}, "count": {self.count}, '
                f'"mean": {mean}, "cov": {cov}}}')


def _accumulate(rows: np.ndarray) -> GaussianStats:
    """Two-pass mean / centered co-moment over one chunk (any N >= 0)."""
    n, d = rows.shape
    if n == 0:
        return GaussianStats.empty(d)
    mean = rows.mean(axis=0, dtype=np.float64)
    m = np.zeros((d, d))
    for lo in range(0, n, _CHUNK_ROWS):
        c = rows[lo:lo + _CHUNK_ROWS].astype(np.float64) - mean
        m += c.T @ c
    m = (m + m.T) * 0.5
    return GaussianStats(d, n, mean, m)


def fit(emb: EmbeddingSet) -> GaussianStats:
    """Mean and unbiased covariance of an embedding set; requires N >= 2."""
    if emb.count < 2:
        raise DataError(f"need at least 2 rows to fit, got {emb.count}")
    return _accumulate(emb.data)


def merge(a: GaussianStats, b: GaussianStats) -> GaussianStats:
    """Combine two accumulators as if over the concatenated data."""
    if a.dim != b.dim:
        raise DataError(f"dim mismatch: {a.dim} vs {b.dim}")
    if a.count == 0:
        return b
    if b.count == 0:
        return a
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m = a.co_moment + b.co_moment + np.outer(delta, delta) * (a.count * b.count / n)
    return GaussianStats(a.dim, n, mean, m)


def fit_partitioned(emb: EmbeddingSet, parts: int, max_workers: int | None = None
                    ) -> GaussianStats:
    """Fit by splitting rows into ``parts`` chunks and merging in order.

    The chunking depends only on ``parts``, and chunks merge in index
    order, so the result is bitwise independent of ``max_workers``.
    """
    if emb.count < 2:
        raise DataError(f"need at least 2 rows to fit, got {emb.count}")
    parts = max(1, min(int(parts), emb.count))
    bounds = np.linspace(0, emb.count, parts + 1, dtype=np.int64)
    chunks = [emb.data[bounds[i]:bounds[i + 1]] for i in range(parts)]
    if max_workers is not None and max_workers > 1 and parts > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            stats = list(pool.map(_accumulate, chunks))
    else:
        stats = [_accumulate(c) for c in chunks]
    out = stats[0]
    for s in stats[1:]:
        out = merge(out, s)
    return out


def _round_robin_pairs(d: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: each round pairs disjoint indices, every
    unordered pair appears exactly once per sweep."""
    players = list(range(d))
    if d % 2:
        players.append(-1)  # bye
    n = len(players)
    rounds = []
    for _ in range(n - 1):
        ps, qs = [], []
        for i in range(n // 2):
            a, b = players[i], players[n - 1 - i]
            if a >= 0 and b >= 0:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps), np.array(qs)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    # summed from the off-diagonal entries themselves: differencing the
    # total against the diagonal mass cancels catastrophically once the
    # off-diagonal part is small
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def sym_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and orthonormal eigenvector
    columns satisfying ||m V - V diag(w)||_F <= 1e-8 max(1, ||m||_F).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"expected a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise DataError("matrix contains non-finite values")
    d = m.shape[0]
    frob = float(np.linalg.norm(m))
    if float(np.linalg.norm(m - m.T)) > EIG_SYMMETRY_TOL * max(frob, 1e-300):
        raise DataError("matrix is not symmetric within tolerance")
    a = (m + m.T) * 0.5
    v = np.eye(d)
    if d == 1:
        return a[0].copy(), v

    target = EIG_RESIDUAL_TOL * max(1.0, frob)
    stop = 1e-3 * target  # margin so the verified residual clears the bound
    # pairs below rot_tol cannot lift the off-norm past stop even all
    # together; skipping them also bounds |tau| by ~d*frob/stop, so the
    # rotation closed form below cannot overflow
    rot_tol = stop / (2.0 * d)
    schedule = _round_robin_pairs(d)
    max_sweeps = EIG_MAX_SWEEPS_PER_DIM * d
    converged = _off_norm(a) <= stop
    for _ in range(max_sweeps):
        if converged:
            break
        for ps, qs in schedule:
            apq = a[ps, qs]
            live = np.abs(apq) > rot_tol
            if not live.any():
                continue
            app = a[ps, ps]
            aqq = a[qs, qs]
            tau = np.where(live, (aqq - app) / np.where(live, 2.0 * apq, 1.0), 0.0)
            t = np.where(live,
                         np.sign(np.where(tau == 0.0, 1.0, tau))
                         / (np.abs(tau) + np.sqrt(tau * tau + 1.0)),
                         0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # rows p,q then columns p,q: A <- J^T A J for the disjoint planes
            ap = a[ps, :].copy()
            aq = a[qs, :]
            a[ps, :] = c[:, None] * ap - s[:, None] * aq
            a[qs, :] = s[:, None] * ap + c[:, None] * aq
            ap = a[:, ps].copy()
            aq = a[:, qs]
            a[:, ps] = c[None, :] * ap - s[None, :] * aq
            a[:, qs] = s[None, :] * ap + c[None, :] * aq
            a[ps, qs] = 0.0
            a[qs, ps] = 0.0
            vp = v[:, ps].copy()
            vq = v[:, qs]
            v[:, ps] = c[None, :] * vp - s[None, :] * vq
            v[:, qs] = s[None, :] * vp + c[None, :] * vq
        converged = _off_norm(a) <= stop
    w = np.diag(a).copy()
    residual = float(np.linalg.norm(m @ v - v * w[None, :]))
    if residual > target:
        raise NumericalError(
            f"Jacobi iteration did not converge: residual {residual:.3e} "
            f"exceeds {target:.3e}")
    order = np.argsort(-w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root: result @ result ~= m.

    Eigenvalues slightly negative from roundoff (>= -1e-8 * lambda_max)
    are clamped to zero; anything lower is a materially indefinite input.
    """
    w, v = sym_eig(m)
    lam_max = max(float(w[0]), 0.0)
    tol = PSD_CLAMP_REL * lam_max
    if float(w[-1]) < -tol:
        raise NumericalError(
            f"matrix is not PSD: eigenvalue {w[-1]:.6e} below -{tol:.6e}")
    root = v * np.sqrt(np.clip(w, 0.0, None))[None, :] @ v.T
    return (root + root.T) * 0.5


def frechet(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet distance between two Gaussian fits.

    Symmetric in its arguments and exactly 0 for identical stats.  Small
    negative totals from roundoff (above -1e-6) clamp to zero.
    """
    if a.dim != b.dim:
        raise DataError(f"dim mismatch: {a.dim} vs {b.dim}")
    if a.count < 2 or b.count < 2:
        raise DataError("both inputs need count >= 2")
    cov_a, cov_b = a.cov, b.cov
    if (np.array_equal(a.mean, b.mean) and np.array_equal(cov_a, cov_b)):
        return 0.0
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    root_a = psd_sqrt(cov_a)
    inner = root_a @ cov_b @ root_a
    cross = psd_sqrt((inner + inner.T) * 0.5)
    value = mean_term + float(np.trace(cov_a) + np.trace(cov_b)
                              - 2.0 * np.trace(cross))
    if value < 0.0:
        if value <= DISTANCE_CLAMP:
            raise NumericalError(
                f"Frechet distance {value:.6e} below clamp threshold")
        value = 0.0
    return value
