import numpy as np
import pytest
from t2av import read_embeddings

from t2av_extract import (EncoderUnavailableError, ExtractError,
                          VocabularyError, extract_text, text_encoder)


def test_one_row_per_tag(tmp_path):
    out = tmp_path / "t.emb"
    count, dim = extract_text(["dog bark", "rain", "engine"], "hashvec", out)
    assert (count, dim) == (3, 300)
    assert read_embeddings(out).segments_per_clip == 1


def test_repeated_tag_identical(tmp_path):
    out = tmp_path / "t.emb"
    extract_text(["thunder", "thunder"], "hashvec", out)
    rows = read_embeddings(out).data
    np.testing.assert_array_equal(rows[0], rows[1])


def test_two_word_tag_is_the_mean():
    enc = text_encoder("hashvec")
    both = enc.row("dog bark")
    np.testing.assert_allclose(both, (enc.row("dog") + enc.row("bark")) / 2.0,
                               rtol=1e-12)


def test_case_and_punctuation_fold():
    enc = text_encoder("hashvec")
    np.testing.assert_array_equal(enc.row("Dog, Bark!"), enc.row("dog bark"))


def test_all_oov_tag_lists_the_tag(tmp_path):
    with pytest.raises(VocabularyError, match="12345"):
        extract_text(["rain", "12345"], "hashvec", tmp_path / "t.emb")


def test_empty_tag_rejected(tmp_path):
    with pytest.raises(ExtractError, match="non-empty"):
        extract_text(["rain", "  "], "hashvec", tmp_path / "t.emb")


def test_unknown_encoder():
    with pytest.raises(EncoderUnavailableError):
        text_encoder("bert-base")


@pytest.fixture
def vec_table(tmp_path):
    table = tmp_path / "vecs.txt"
    table.write_text("3 4\n"
                     "dog 1 0 0 0\n"
                     "bark 0 1 0 0\n"
                     "rain 0 0 1 0\n")
    return table


def test_word2vec_file_lookup(vec_table):
    enc = text_encoder(f"word2vec:{vec_table}")
    assert enc.dim == 4
    np.testing.assert_array_equal(enc.row("dog bark"), [0.5, 0.5, 0.0, 0.0])


def test_word2vec_oov_words_skipped(vec_table):
    enc = text_encoder(f"word2vec:{vec_table}")
    np.testing.assert_array_equal(enc.row("dog sneezing"), [1.0, 0.0, 0.0, 0.0])
    with pytest.raises(VocabularyError, match="purring cat"):
        enc.row("purring cat")


def test_word2vec_file_errors(tmp_path):
    with pytest.raises(ExtractError, match="no such file"):
        text_encoder(f"word2vec:{tmp_path / 'gone.txt'}")
    ragged = tmp_path / "ragged.txt"
    ragged.write_text("dog 1 0\nbark 0 1 0\n")
    with pytest.raises(ExtractError, match="expected 2"):
        text_encoder(f"word2vec:{ragged}")
    empty = tmp_path / "empty.txt"
    empty.write_text("\n")
    with pytest.raises(ExtractError, match="no word vectors"):
        text_encoder(f"word2vec:{empty}")


def test_word2vec_through_extract(tmp_path, vec_table):
    out = tmp_path / "t.emb"
    count, dim = extract_text(["dog", "rain"], f"word2vec:{vec_table}", out)
    assert (count, dim) == (2, 4)
