import json
import math

import numpy as np
import pytest

from t2av.embedset import EmbeddingSet, ProjectionSpec
from t2av.errors import DataError
from t2av.metrics import (
    MetricReport,
    fatd,
    favd,
    favtd,
    format_table,
    frechet_sets,
    inception_score,
    paired_kl,
)


def emb(rows, modality="latent", t=0):
    return EmbeddingSet(np.asarray(rows, dtype=np.float32), t, modality)


def rand_emb(rng, n, d, modality="latent", shift=0.0):
    return EmbeddingSet((rng.standard_normal((n, d)) + shift).astype(np.float32),
                        modality=modality)


# --------------------------------------------------------------- frechet_sets

def test_frechet_sets_identical_zero():
    rng = np.random.default_rng(0)
    a = rand_emb(rng, 50, 4)
    rep = frechet_sets(a, a)
    assert rep.value == 0.0
    assert rep.n_a == rep.n_b == 50


def test_frechet_sets_label_tracks_modality():
    rng = np.random.default_rng(1)
    a = rand_emb(rng, 20, 3, modality="audio")
    b = rand_emb(rng, 20, 3, modality="audio")
    assert frechet_sets(a, b).metric == "FAD"
    assert frechet_sets(a, b.with_modality("video")).metric == "FD"


def test_frechet_sets_known_separation():
    rng = np.random.default_rng(2)
    a = rand_emb(rng, 5000, 4)
    b = rand_emb(rng, 5000, 4, shift=1.0)  # ||dmu||^2 = 4
    assert abs(frechet_sets(a, b).value - 4.0) <= 0.15


def test_frechet_sets_rejects_single_row():
    a = emb([[1.0, 2.0]])
    with pytest.raises(DataError):
        frechet_sets(a, a)


def test_frechet_sets_rejects_dim_mismatch():
    rng = np.random.default_rng(3)
    with pytest.raises(DataError):
        frechet_sets(rand_emb(rng, 10, 3), rand_emb(rng, 10, 4))


def test_orthogonal_invariance():
    rng = np.random.default_rng(4)
    a = rand_emb(rng, 400, 6)
    b = rand_emb(rng, 400, 6, shift=0.5)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    qa = EmbeddingSet((a.data @ q.astype(np.float32)))
    qb = EmbeddingSet((b.data @ q.astype(np.float32)))
    base = frechet_sets(a, b).value
    rotated = frechet_sets(qa, qb).value
    assert abs(base - rotated) <= 1e-8 * max(1.0, base)


# ------------------------------------------------------------- favd and kin

def test_favd_matched_near_zero():
    rng = np.random.default_rng(5)
    latent = rng.standard_normal((5000, 8))
    audio = EmbeddingSet(latent.astype(np.float32), modality="audio")
    video = EmbeddingSet(
        (rng.standard_normal((5000, 8))).astype(np.float32), modality="video")
    rep = favd(audio, video)
    assert rep.metric == "FAVD"
    assert rep.value <= 0.5


def test_favd_pads_wider_set_down():
    rng = np.random.default_rng(6)
    audio = rand_emb(rng, 100, 4, "audio")
    video = rand_emb(rng, 100, 6, "video")
    rep = favd(audio, video)
    assert rep.adapter == "pad_truncate(->4)"
    wide_first = favd(video.with_modality("audio"), audio.with_modality("video"))
    assert abs(rep.value - wide_first.value) <= 1e-9


def test_matrix_adapter():
    rng = np.random.default_rng(7)
    audio = rand_emb(rng, 200, 3, "audio")
    video = rand_emb(rng, 200, 5, "video")
    m = rng.standard_normal((5, 3)).astype(np.float32)
    rep = favd(audio, video, adapter=ProjectionSpec("matrix", matrix=m))
    assert rep.adapter == "matrix(5->3)"
    with pytest.raises(DataError):
        favd(audio, rand_emb(rng, 10, 7, "video"),
             adapter=ProjectionSpec("matrix", matrix=m))


def test_fatd_identical_zero():
    rng = np.random.default_rng(8)
    a = rand_emb(rng, 30, 4, "audio")
    rep = fatd(a, a.with_modality("text"))
    assert rep.metric == "FATD"
    assert rep.value == 0.0


def test_favtd_duplicate_reference_equals_favd():
    rng = np.random.default_rng(9)
    audio = rand_emb(rng, 80, 5, "audio")
    video = rand_emb(rng, 80, 5, "video")
    via_favtd = favtd(audio, video, video.with_modality("text"))
    via_favd = favd(audio, video)
    assert via_favtd.value == via_favd.value
    assert via_favtd.metric == "FAVTD"


def test_favtd_requires_pairable_references():
    rng = np.random.default_rng(10)
    audio = rand_emb(rng, 40, 3, "audio")
    video = rand_emb(rng, 40, 3, "video")
    text = rand_emb(rng, 39, 3, "text")
    with pytest.raises(DataError):
        favtd(audio, video, text)


# ------------------------------------------------------------------------ IS

def test_is_uniform_rows():
    rows = np.full((10, 4), 0.25)
    assert abs(inception_score(emb(rows, "probs")).value - 1.0) <= 1e-9


def test_is_one_hot_five_classes():
    rows = np.eye(5)[list(range(5)) * 4]
    assert abs(inception_score(emb(rows, "probs")).value - 5.0) <= 1e-6


def test_is_mixed_hand_case():
    rows = [[1.0, 0.0], [0.5, 0.5]]
    # marginal (0.75, 0.25); KLs 0.28768 and 0.14384
    assert abs(inception_score(emb(rows, "probs")).value - 1.2408) <= 1e-4


def test_is_splits():
    rows = np.eye(4)[list(range(4)) * 8]
    one = inception_score(emb(rows, "probs"), splits=1).value
    four = inception_score(emb(rows, "probs"), splits=4).value
    assert abs(one - 4.0) <= 1e-6
    assert abs(four - 4.0) <= 1e-6
    with pytest.raises(DataError):
        inception_score(emb(rows[:3], "probs"), splits=4)


def test_is_permutation_invariant_single_split():
    rng = np.random.default_rng(11)
    raw = rng.uniform(0.05, 1.0, (30, 6))
    rows = raw / raw.sum(axis=1, keepdims=True)
    base = inception_score(emb(rows, "probs")).value
    perm = inception_score(emb(rows[rng.permutation(30)], "probs")).value
    assert abs(base - perm) <= 1e-12


def test_is_rejects_bad_rows():
    with pytest.raises(DataError):
        inception_score(emb([[0.5, -0.1, 0.6]], "probs"))
    with pytest.raises(DataError):
        inception_score(emb([[0.7, 0.2]], "probs"))  # sums to 0.9


def test_is_renormalizes_near_one_sums():
    rows = np.full((6, 4), 0.25) * (1 + 5e-7)
    assert abs(inception_score(emb(rows, "probs")).value - 1.0) <= 1e-9


# ------------------------------------------------------------------ paired KL

def test_paired_kl_identical_zero():
    rng = np.random.default_rng(12)
    raw = rng.uniform(0.1, 1.0, (20, 5))
    rows = raw / raw.sum(axis=1, keepdims=True)
    rep = paired_kl(emb(rows, "probs"), emb(rows, "probs"))
    assert rep.value == 0.0
    assert rep.metric == "KL"


def test_paired_kl_hand_case():
    ref = emb([[1.0, 0.0]], "probs")
    gen = emb([[0.5, 0.5]], "probs")
    assert abs(paired_kl(ref, gen).value - math.log(2)) <= 1e-12
    two = paired_kl(emb([[1.0, 0.0]] * 2, "probs"), emb([[0.5, 0.5]] * 2, "probs"))
    assert abs(two.value - math.log(2)) <= 1e-12


def test_paired_kl_direction():
    ref = emb([[1.0, 0.0]], "probs")
    gen = emb([[0.5, 0.5]], "probs")
    fwd = paired_kl(ref, gen, direction="ref_to_gen").value
    rev = paired_kl(ref, gen, direction="gen_to_ref").value
    assert abs(fwd - math.log(2)) <= 1e-12
    # reverse direction hits the 1e-12 floor on the zero entry
    assert rev > fwd
    with pytest.raises(DataError):
        paired_kl(ref, gen, direction="sideways")


def test_paired_kl_shape_mismatch():
    with pytest.raises(DataError):
        paired_kl(emb([[1.0, 0.0]], "probs"), emb([[1.0, 0.0, 0.0]], "probs"))
    with pytest.raises(DataError):
        paired_kl(emb([[1.0, 0.0]], "probs"), emb([[1.0, 0.0]] * 2, "probs"))


# -------------------------------------------------------------------- reports

def test_report_validation():
    with pytest.raises(DataError):
        MetricReport("FAVD", -0.5, 1, 1)
    with pytest.raises(DataError):
        MetricReport("IS", 0.5, 1, 1)
    with pytest.raises(DataError):
        MetricReport("XX", 1.0, 1, 1)
    with pytest.raises(DataError):
        MetricReport("FD", float("nan"), 1, 1)


def test_report_json_line():
    rep = MetricReport("FAVD", 1.25, 10, 12, adapter="pad_truncate(->4)", seed=3)
    doc = json.loads(rep.to_json_line())
    assert doc == {"metric": "FAVD", "value": 1.25, "n_a": 10, "n_b": 12,
                   "adapter": "pad_truncate(->4)", "seed": 3}


def test_format_table_aligns():
    reports = [MetricReport("FAVD", 1.23456, 10, 12),
               MetricReport("IS", 4.0, 100, 100, seed=7)]
    text = format_table(reports)
    lines = text.splitlines()
    assert lines[0].startswith("metric")
    assert "1.2346" in lines[1]
    assert "4.0000" in lines[2]
