"""Cluster maps, class model estimation, and their file formats."""

import random

import numpy as np
import pytest

import oracles
from corpusgen import random_table, table_from_sentences

from clusterlm.classmodel import (
    ClassModel,
    ClusterMap,
    estimate_class_model,
    init_clustering,
    load_clusters,
    save_clusters,
)
from clusterlm.corpus import Vocabulary, count_events
from clusterlm.discounting import Discount
from clusterlm.errors import ConfigError, FormatError


def small_setup():
    vocab = Vocabulary(["high", "mid", "low", "rare"])
    corpus = [
        ["high", "mid", "high", "low"],
        ["high", "mid", "rare"],
        ["mid", "high", "low"],
    ]
    counts = count_events(corpus, vocab)
    return vocab, counts


# ---------------------------------------------------------------- cluster map


def test_cluster_map_validates_shapes_and_range():
    with pytest.raises(ConfigError):
        ClusterMap([0, 1], [0], 2, 2)
    with pytest.raises(ConfigError):
        ClusterMap([0, 2], [0, 1], 2, 2)
    cm = ClusterMap([0, 1], [1, 0], 2, 2)
    assert cm.vocab_size == 2


def test_cluster_map_copy_is_independent():
    cm = ClusterMap([0, 1, 1], [1, 0, 1], 2, 2, frozen_states={0})
    dup = cm.copy()
    dup.state_of[0] = 1
    assert cm.state_of[0] == 0
    assert dup.frozen_states == {0}
    assert not cm.same_assignments(dup)
    assert cm.same_assignments(cm.copy())


def test_init_clustering_layout():
    vocab, counts = small_setup()
    cm = init_clustering(counts, k_states=3, k_cats=2, vocab=vocab)
    assert cm.n_states == 4 and cm.n_cats == 4
    assert cm.k_states == 3 and cm.k_cats == 2

    # begin marker owns the extra state and sits in the top regular category
    assert cm.state_of[vocab.bos_id] == 3
    assert cm.category_of[vocab.bos_id] == 1
    # end and unknown markers own the extra categories
    assert cm.category_of[vocab.eos_id] == 2
    assert cm.category_of[vocab.unk_id] == 3
    assert cm.state_of[vocab.eos_id] == 2
    assert cm.state_of[vocab.unk_id] == 2

    assert cm.frozen_states == {vocab.bos_id}
    assert cm.frozen_cats == {vocab.eos_id, vocab.unk_id}

    # "high" (4 tokens) and "mid" (3) take the singleton states, rest share
    high, mid = vocab.lookup("high"), vocab.lookup("mid")
    low, rare = vocab.lookup("low"), vocab.lookup("rare")
    assert cm.state_of[high] == 0
    assert cm.state_of[mid] == 1
    assert cm.state_of[low] == 2 and cm.state_of[rare] == 2
    # category side: only one singleton slot
    assert cm.category_of[high] == 0
    assert cm.category_of[mid] == 1 and cm.category_of[low] == 1


def test_init_clustering_breaks_count_ties_on_word_string():
    vocab = Vocabulary(["zz", "aa"])
    counts = count_events([["zz", "aa"]], vocab)
    cm = init_clustering(counts, 2, 2, vocab)
    assert cm.state_of[vocab.lookup("aa")] == 0
    assert cm.state_of[vocab.lookup("zz")] == 1


def test_init_clustering_rejects_bad_k():
    vocab, counts = small_setup()
    with pytest.raises(ConfigError):
        init_clustering(counts, 1, 2, vocab)
    with pytest.raises(ConfigError):
        init_clustering(counts, 2, 5, vocab)


def test_cluster_file_round_trip(tmp_path):
    vocab, counts = small_setup()
    cm = init_clustering(counts, 3, 2, vocab)
    path = tmp_path / "clusters.txt"
    save_clusters(path, vocab, cm, metadata={"score": -12.5, "iterations": 4})
    loaded, fields = load_clusters(path, vocab)
    assert loaded.same_assignments(cm)
    assert loaded.k_states == cm.k_states and loaded.k_cats == cm.k_cats
    assert loaded.frozen_states == cm.frozen_states
    assert loaded.frozen_cats == cm.frozen_cats
    assert fields["score"] == "-12.5"
    assert fields["iterations"] == "4"
    assert fields["vocab_md5"] == vocab.checksum()

    # second save of the loaded map is byte-identical
    path2 = tmp_path / "again.txt"
    save_clusters(path2, vocab, loaded, metadata={"score": -12.5, "iterations": 4})
    assert path.read_bytes() == path2.read_bytes()


def test_cluster_file_rejects_foreign_vocab(tmp_path):
    vocab, counts = small_setup()
    cm = init_clustering(counts, 2, 2, vocab)
    path = tmp_path / "clusters.txt"
    save_clusters(path, vocab, cm)
    with pytest.raises(FormatError):
        load_clusters(path, Vocabulary(["other", "words", "here", "now"]))


def test_cluster_file_rejects_incomplete_coverage(tmp_path):
    vocab, counts = small_setup()
    cm = init_clustering(counts, 2, 2, vocab)
    path = tmp_path / "clusters.txt"
    save_clusters(path, vocab, cm)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(FormatError):
        load_clusters(path, vocab)


# ------------------------------------------------------------------ the model


def test_model_rows_sum_to_one():
    vocab, counts = small_setup()
    cm = init_clustering(counts, 3, 2, vocab)
    model = estimate_class_model(counts, cm)
    for v in range(len(vocab)):
        total = sum(model.prob(v, w) for w in range(len(vocab)))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_class_distributions_normalize():
    vocab, counts = small_setup()
    cm = init_clustering(counts, 2, 3, vocab)
    model = estimate_class_model(counts, cm)
    for s in range(cm.n_states):
        assert sum(
            model.class_given_state(s, g) for g in range(cm.n_cats)
        ) == pytest.approx(1.0, abs=1e-12)


def test_model_matches_direct_computation():
    rng = random.Random(77)
    for _ in range(8):
        vocab_size = rng.randint(6, 12)
        k_s, k_c = rng.randint(2, 4), rng.randint(2, 4)
        counts = random_table(rng, vocab_size)
        states = [rng.randrange(k_s) for _ in range(vocab_size)]
        cats = [rng.randrange(k_c) for _ in range(vocab_size)]
        cats[:k_c] = list(range(k_c))  # keep every category populated
        cm = ClusterMap(states, cats, k_s, k_c)
        b = rng.uniform(0.2, 0.8)
        model = estimate_class_model(counts, cm, discount=Discount(b))
        for v in range(vocab_size):
            for w in range(vocab_size):
                want = oracles.class_model_probability(
                    counts.rows, states, cats, k_s, k_c, b, b, b, v, w
                )
                assert model.prob(v, w) == pytest.approx(want, rel=1e-10)


def test_relabeling_clusters_preserves_probabilities():
    rng = random.Random(13)
    vocab_size, k_s, k_c = 12, 4, 5
    counts = random_table(rng, vocab_size)
    states = [rng.randrange(k_s) for _ in range(vocab_size)]
    cats = [rng.randrange(k_c) for _ in range(vocab_size)]
    perm_s = list(range(k_s))
    perm_c = list(range(k_c))
    rng.shuffle(perm_s)
    rng.shuffle(perm_c)
    cm1 = ClusterMap(states, cats, k_s, k_c)
    cm2 = ClusterMap(
        [perm_s[s] for s in states], [perm_c[g] for g in cats], k_s, k_c
    )
    m1 = estimate_class_model(counts, cm1, discount=Discount(0.5))
    m2 = estimate_class_model(counts, cm2, discount=Discount(0.5))
    for v in range(vocab_size):
        for w in range(vocab_size):
            assert m1.prob(v, w) == pytest.approx(m2.prob(v, w), rel=1e-12)


def test_model_file_round_trip(tmp_path):
    vocab, counts = small_setup()
    cm = init_clustering(counts, 3, 2, vocab)
    model = estimate_class_model(counts, cm, vocab_md5=vocab.checksum())
    p1 = tmp_path / "m1.lm"
    model.save(p1)
    loaded = ClassModel.load(p1)
    p2 = tmp_path / "m2.lm"
    loaded.save(p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert loaded.vocab_md5 == vocab.checksum()
    for v in range(len(vocab)):
        for w in range(len(vocab)):
            assert loaded.prob(v, w) == model.prob(v, w)


def test_estimate_rejects_size_mismatch():
    vocab, counts = small_setup()
    cm = init_clustering(counts, 2, 2, vocab)
    from clusterlm.corpus import CountTable

    with pytest.raises(ConfigError):
        estimate_class_model(CountTable(3), cm)


def test_structured_corpus_gets_useful_classes():
    # words that always precede the same successors share a state profile;
    # the estimate should give successors similar probabilities after them
    from corpusgen import block_corpus

    sents = block_corpus(60)
    vocab, counts = table_from_sentences(sents)
    cm = init_clustering(counts, 2, 2, vocab)
    # force the intended solution and check it predicts the held pattern
    for w in ("p0", "p1", "p2"):
        cm.state_of[vocab.lookup(w)] = 0
        cm.category_of[vocab.lookup(w)] = 0
    for w in ("q0", "q1", "q2"):
        cm.state_of[vocab.lookup(w)] = 1
        cm.category_of[vocab.lookup(w)] = 1
    model = estimate_class_model(counts, cm)
    p0, q0 = vocab.lookup("p0"), vocab.lookup("q0")
    assert model.prob(p0, q0) > model.prob(q0, q0)
    assert model.prob(q0, p0) > model.prob(p0, p0)
