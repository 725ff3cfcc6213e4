"""Vocabulary and counting behaviour."""

import numpy as np
import pytest

from clusterlm.corpus import (
    CountTable,
    Vocabulary,
    build_vocabulary,
    count_events,
    merge_counts,
    read_sentences,
    sentence_ids,
    tokenize_line,
)
from clusterlm.errors import ConfigError, FormatError


def test_reserved_ids_are_fixed():
    vocab = Vocabulary(["alpha", "beta"])
    assert vocab.unk_id == 0
    assert vocab.bos_id == 1
    assert vocab.eos_id == 2
    assert vocab.lookup("alpha") == 3
    assert vocab.lookup("beta") == 4


def test_lookup_unknown_maps_to_unk():
    vocab = Vocabulary(["alpha"])
    assert vocab.lookup("missing") == vocab.unk_id
    assert "missing" not in vocab
    assert "alpha" in vocab


def test_add_is_idempotent():
    vocab = Vocabulary()
    first = vocab.add("tok")
    assert vocab.add("tok") == first
    assert len(vocab) == 4


def test_vocab_round_trip(tmp_path):
    vocab = Vocabulary(["one", "two", "three"])
    path = tmp_path / "words.txt"
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.entries == vocab.entries
    assert loaded.checksum() == vocab.checksum()


def test_vocab_load_rejects_missing_reserved(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("one\ntwo\n")
    with pytest.raises(FormatError):
        Vocabulary.load(path)


def test_vocab_load_rejects_duplicates(tmp_path):
    path = tmp_path / "dup.txt"
    path.write_text("<unk>\n<s>\n</s>\nword\nword\n")
    with pytest.raises(FormatError):
        Vocabulary.load(path)


def test_checksum_tracks_content():
    assert Vocabulary(["a"]).checksum() != Vocabulary(["b"]).checksum()


def test_tokenize_collapses_whitespace():
    assert tokenize_line("  a \t b  c\n") == ["a", "b", "c"]


def test_read_sentences_skips_blank_lines(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("a b\n\n  \nc\n")
    assert list(read_sentences(path)) == [["a", "b"], ["c"]]


def test_build_vocabulary_prefers_adaptation_words():
    adapt = [["rare", "shared"]]
    back = [["shared"] * 5, ["common"] * 9, ["filler"] * 2]
    vocab = build_vocabulary(adapt, back, max_size=6)
    # both adaptation words present even though background words are more frequent
    assert "rare" in vocab and "shared" in vocab
    # one slot left for the most frequent unseen background word
    assert "common" in vocab
    assert "filler" not in vocab
    assert len(vocab) == 6


def test_build_vocabulary_caps_adaptation_side_by_frequency():
    adapt = [["hot"] * 3 + ["mid"] * 2 + ["cold"]]
    vocab = build_vocabulary(adapt, [], max_size=5)
    assert "hot" in vocab and "mid" in vocab
    assert "cold" not in vocab


def test_build_vocabulary_breaks_frequency_ties_lexicographically():
    adapt = [["zeta", "beta"]]
    vocab = build_vocabulary(adapt, [], max_size=5)
    assert vocab.lookup("beta") == 3
    assert vocab.lookup("zeta") == 4


def test_build_vocabulary_rejects_tiny_cap():
    with pytest.raises(ConfigError):
        build_vocabulary([], [], max_size=3)


def test_sentence_ids_frames_with_markers():
    vocab = Vocabulary(["a", "b"])
    assert sentence_ids(["a", "b", "zzz"], vocab) == [1, 3, 4, 0, 2]


def test_count_events_column_sums_equal_unigram():
    vocab = Vocabulary(["a", "b", "c"])
    corpus = [["a", "b"], ["b", "c", "a"], ["a"]]
    counts = count_events(corpus, vocab)
    totals = np.zeros(len(vocab), dtype=np.int64)
    for v, row in counts.rows.items():
        for w, c in row.items():
            totals[w] += c
    assert np.array_equal(totals, counts.unigram)
    # predicted positions: every token plus one end marker per sentence
    assert counts.total_tokens == 6 + 3
    assert counts.unigram[vocab.bos_id] == 0
    assert counts.unigram[vocab.eos_id] == 3


def test_count_events_bigram_values():
    vocab = Vocabulary(["a", "b"])
    counts = count_events([["a", "b"], ["a", "b"]], vocab)
    a, b = vocab.lookup("a"), vocab.lookup("b")
    assert counts.bigram(a, b) == 2
    assert counts.bigram(vocab.bos_id, a) == 2
    assert counts.bigram(b, vocab.eos_id) == 2
    assert counts.bigram(b, a) == 0
    assert counts.context_total(a) == 2


def test_count_table_round_trip(tmp_path):
    vocab = Vocabulary(["a", "b"])
    counts = count_events([["a", "b", "a"]], vocab)
    path = tmp_path / "counts.txt"
    counts.save(path, vocab.checksum())
    loaded, md5 = CountTable.load(path)
    assert md5 == vocab.checksum()
    assert loaded.vocab_size == counts.vocab_size
    assert loaded.total_tokens == counts.total_tokens
    assert loaded.rows == counts.rows
    assert np.array_equal(loaded.unigram, counts.unigram)


def test_count_table_load_rejects_out_of_range(tmp_path):
    path = tmp_path / "counts.txt"
    vocab = Vocabulary(["a"])
    counts = count_events([["a"]], vocab)
    counts.save(path, vocab.checksum())
    text = path.read_text().replace("vocab_size=4", "vocab_size=2")
    path.write_text(text)
    with pytest.raises(FormatError):
        CountTable.load(path)


def test_merge_counts_sums_shards():
    vocab = Vocabulary(["a", "b"])
    c1 = count_events([["a", "b"]], vocab)
    c2 = count_events([["b", "a"]], vocab)
    merged = merge_counts([c1, c2])
    assert merged.total_tokens == c1.total_tokens + c2.total_tokens
    a, b = 3, 4
    assert merged.bigram(a, b) == 1
    assert merged.bigram(b, a) == 1
    assert np.array_equal(merged.unigram, c1.unigram + c2.unigram)


def test_merge_counts_requires_input():
    with pytest.raises(ConfigError):
        merge_counts([])


def test_merge_rejects_vocab_size_mismatch():
    with pytest.raises(ConfigError):
        CountTable(4).merge(CountTable(5))


def test_cols_transposes_rows():
    counts = CountTable(5)
    counts.add_bigram(3, 4, 2)
    counts.add_bigram(0, 4, 1)
    assert counts.cols()[4] == {3: 2, 0: 1}
