import struct

import numpy as np
import pytest

from t2av.embedset import (
    HEADER_SIZE,
    EmbeddingSet,
    Pair,
    PairManifest,
    ProjectionSpec,
    average_sets,
    project,
    read_embeddings,
    select_clips,
    select_rows,
    shift_segments,
    write_embeddings,
)
from t2av.errors import (
    BadMagicError,
    DataError,
    NonFiniteValueError,
    TruncatedPayloadError,
    VersionMismatchError,
)


def make_set(rows, t=0, modality="latent"):
    return EmbeddingSet(np.asarray(rows, dtype=np.float32), t, modality)


def test_header_is_32_bytes():
    assert HEADER_SIZE == 32


def test_empty_set_writes_header_only_file(tmp_path):
    p = tmp_path / "empty.t2avemb"
    write_embeddings(make_set(np.zeros((0, 8))), p)
    assert p.stat().st_size == 32
    back = read_embeddings(p)
    assert back.count == 0
    assert back.dim == 8


def test_known_byte_layout(tmp_path):
    p = tmp_path / "two.t2avemb"
    write_embeddings(make_set([[1.0, 2.0], [3.0, 4.0]]), p)
    raw = p.read_bytes()
    assert raw[:8] == b"T2AVEMB1"
    version, dim = struct.unpack_from("<II", raw, 8)
    count, = struct.unpack_from("<Q", raw, 16)
    segments, dtype = struct.unpack_from("<II", raw, 24)
    assert (version, dim, count, segments, dtype) == (1, 2, 2, 0, 0)
    # little-endian float32: 1.0, 2.0, 3.0, 4.0
    assert raw[32:] == bytes.fromhex("0000803f 00000040 00004040 00008040")


def test_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(7)
    emb = EmbeddingSet(rng.standard_normal((12, 5)).astype(np.float32), 4, "audio")
    p = tmp_path / "rt.t2avemb"
    write_embeddings(emb, p)
    back = read_embeddings(p, modality="audio")
    assert back.data.tobytes() == emb.data.tobytes()
    assert back.segments_per_clip == 4
    assert back == emb


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.t2avemb"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 24)
    with pytest.raises(BadMagicError):
        read_embeddings(p)


def test_version_mismatch(tmp_path):
    p = tmp_path / "v2.t2avemb"
    p.write_bytes(struct.pack("<8sIIQII", b"T2AVEMB1", 2, 2, 0, 0, 0))
    with pytest.raises(VersionMismatchError):
        read_embeddings(p)


def test_unknown_dtype_code(tmp_path):
    p = tmp_path / "dt.t2avemb"
    p.write_bytes(struct.pack("<8sIIQII", b"T2AVEMB1", 1, 2, 0, 0, 9))
    with pytest.raises(VersionMismatchError):
        read_embeddings(p)


def test_truncated_payload(tmp_path):
    p = tmp_path / "short.t2avemb"
    write_embeddings(make_set([[1.0, 2.0], [3.0, 4.0]]), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-4])
    with pytest.raises(TruncatedPayloadError):
        read_embeddings(p)


def test_oversized_payload_rejected(tmp_path):
    p = tmp_path / "long.t2avemb"
    write_embeddings(make_set([[1.0, 2.0]]), p)
    p.write_bytes(p.read_bytes() + b"\x00\x00\x00\x00")
    with pytest.raises(TruncatedPayloadError):
        read_embeddings(p)


def test_file_shorter_than_header(tmp_path):
    p = tmp_path / "stub.t2avemb"
    p.write_bytes(b"T2AVEMB1\x01\x00")
    with pytest.raises(TruncatedPayloadError):
        read_embeddings(p)


def test_non_finite_payload(tmp_path):
    p = tmp_path / "nan.t2avemb"
    header = struct.pack("<8sIIQII", b"T2AVEMB1", 1, 1, 1, 0, 0)
    p.write_bytes(header + struct.pack("<f", float("nan")))
    with pytest.raises(NonFiniteValueError):
        read_embeddings(p)


def test_constructor_rejects_nan():
    with pytest.raises(NonFiniteValueError):
        make_set([[np.nan, 1.0]])


def test_constructor_rejects_bad_segments():
    with pytest.raises(DataError):
        make_set(np.zeros((5, 2)), t=3)


def test_modality_not_part_of_equality():
    a = make_set([[1.0, 2.0]], modality="audio")
    b = make_set([[1.0, 2.0]], modality="video")
    assert a == b
    assert a.with_modality("text").modality == "text"


def test_select_rows_out_of_bounds():
    emb = make_set(np.zeros((4, 2)))
    with pytest.raises(DataError):
        select_rows(emb, [0, 4])
    with pytest.raises(DataError):
        select_rows(emb, [-1])


def test_select_rows_keeps_compatible_segments():
    emb = make_set(np.arange(12, dtype=np.float32).reshape(6, 2), t=3)
    kept = select_rows(emb, [0, 1, 2])
    assert kept.segments_per_clip == 3
    dropped = select_rows(emb, [0, 1])
    assert dropped.segments_per_clip == 0


def test_select_clips():
    emb = make_set(np.arange(12, dtype=np.float32).reshape(6, 2), t=2)
    out = select_clips(emb, [2, 0])
    assert out.segments_per_clip == 2
    np.testing.assert_array_equal(out.data.ravel(), [8, 9, 10, 11, 0, 1, 2, 3])
    with pytest.raises(DataError):
        select_clips(emb, [3])


def test_project_matrix():
    emb = make_set([[1.0, 2.0]])
    spec = ProjectionSpec("matrix", matrix=np.array([[1, 0, 1], [0, 1, 1]]))
    out = project(emb, spec)
    np.testing.assert_array_equal(out.data, [[1.0, 2.0, 3.0]])
    assert spec.describe() == "matrix(2->3)"
    with pytest.raises(DataError):
        project(make_set([[1.0, 2.0, 3.0]]), spec)


def test_project_pad_truncate():
    emb = make_set([[1.0, 2.0, 3.0]])
    up = project(emb, ProjectionSpec("pad_truncate", target_dim=5))
    np.testing.assert_array_equal(up.data, [[1, 2, 3, 0, 0]])
    down = project(emb, ProjectionSpec("pad_truncate", target_dim=2))
    np.testing.assert_array_equal(down.data, [[1, 2]])
    assert project(emb, ProjectionSpec("pad_truncate", target_dim=3)) is emb


def test_shift_segments_cyclic_and_pad():
    emb = make_set([[1, 1], [2, 2], [3, 3]], t=3)
    cyc = shift_segments(emb, 1, mode="cyclic")
    np.testing.assert_array_equal(cyc.data, [[3, 3], [1, 1], [2, 2]])
    pad = shift_segments(emb, 1, mode="pad_zero")
    np.testing.assert_array_equal(pad.data, [[0, 0], [1, 1], [2, 2]])
    assert shift_segments(emb, 0) is emb


def test_shift_segments_validation():
    emb = make_set(np.zeros((4, 2)), t=2)
    with pytest.raises(DataError):
        shift_segments(emb, 2)
    with pytest.raises(DataError):
        shift_segments(make_set(np.zeros((4, 2))), 1)


def test_cyclic_shift_composes_to_identity():
    rng = np.random.default_rng(3)
    emb = EmbeddingSet(rng.standard_normal((10, 4)).astype(np.float32), 5)
    once = shift_segments(emb, 2, mode="cyclic")
    again = shift_segments(once, 3, mode="cyclic")
    assert again == emb


def test_average_sets():
    a = make_set([[1.0, 3.0]])
    b = make_set([[3.0, 5.0]])
    np.testing.assert_array_equal(average_sets(a, b).data, [[2.0, 4.0]])
    assert average_sets(a, a) == a
    with pytest.raises(DataError):
        average_sets(a, make_set([[1.0, 2.0, 3.0]]))


def test_manifest_round_trip(tmp_path):
    man = PairManifest([
        Pair("clip0", 0, 0, 0, "true_pair", 0.0, "class0"),
        Pair("clip0/false", 5, 0, 0, "false_pair", 2.0, "class0"),
    ])
    p = tmp_path / "m.pairs.json"
    man.save(p)
    back = PairManifest.load(p)
    assert back == man


def test_manifest_validation():
    with pytest.raises(DataError):
        PairManifest([Pair("a", 0, 0, 0, "true_pair"),
                      Pair("a", 1, 1, 1, "true_pair")])
    with pytest.raises(DataError):
        Pair("x", 0, 0, 0, "maybe_pair")
    with pytest.raises(DataError):
        Pair("x", 0, 0, 0, "true_pair", shift_s=-1.0)
    man = PairManifest([Pair("a", 9, 0, 0, "true_pair")])
    sets = [make_set(np.zeros((3, 2))) for _ in range(3)]
    with pytest.raises(DataError):
        man.validate_against(*sets)


def test_manifest_rejects_garbage():
    with pytest.raises(DataError):
        PairManifest.from_json("not json {")
    with pytest.raises(DataError):
        PairManifest.from_json('{"pairs": [{"id": "a"}]}')
