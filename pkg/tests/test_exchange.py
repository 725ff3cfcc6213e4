"""Exchange clustering: determinism, monotonicity, convergence, plumbing."""

import math
import random

import pytest

from corpusgen import block_corpus, domain_corpus, table_from_sentences

from clusterlm.classmodel import init_clustering, load_clusters
from clusterlm.corpus import Vocabulary, build_vocabulary, count_events
from clusterlm.criterion import ClassCounts, combine_counts
from clusterlm.discounting import Discount, estimate_discount
from clusterlm.errors import ConfigError
from clusterlm.exchange import (
    ADAPTIVE,
    STANDARD,
    ExchangeConfig,
    criterion_discount,
    optimize_lambda,
    run_exchange,
    _visit_order,
)


def block_setup(k=2):
    vocab, counts = table_from_sentences(block_corpus(80))
    cm = init_clustering(counts, k, k, vocab)
    return vocab, counts, cm


def adaptive_setup():
    back_sents = domain_corpus("back", seed=1, n_words=2500, topic_size=12)
    adapt_sents = domain_corpus("target", seed=2, n_words=700, topic_size=12)
    vocab = build_vocabulary(adapt_sents, back_sents, max_size=400)
    back = count_events(back_sents, vocab)
    adapt = count_events(adapt_sents, vocab)
    cm = init_clustering(back, 4, 4, vocab)
    return vocab, adapt, back, cm


# --------------------------------------------------------------- validation


def test_config_validation():
    with pytest.raises(ConfigError):
        ExchangeConfig(2, 2, criterion="annealing").validate()
    with pytest.raises(ConfigError):
        ExchangeConfig(2, 2, max_iterations=0).validate()
    with pytest.raises(ConfigError):
        ExchangeConfig(2, 2, lambda_grid=()).validate()
    with pytest.raises(ConfigError):
        ExchangeConfig(2, 2, lambda_grid=(0.5, 1.5)).validate()
    ExchangeConfig(2, 2).validate()


def test_background_counts_must_match_criterion():
    vocab, counts, cm = block_setup()
    with pytest.raises(ConfigError):
        run_exchange(counts, counts, cm, ExchangeConfig(2, 2, criterion=STANDARD))
    with pytest.raises(ConfigError):
        run_exchange(counts, None, cm, ExchangeConfig(2, 2, criterion=ADAPTIVE))


def test_checkpoint_requires_vocabulary(tmp_path):
    _, counts, cm = block_setup()
    with pytest.raises(ConfigError):
        run_exchange(
            counts, None, cm, ExchangeConfig(2, 2),
            checkpoint_path=tmp_path / "ck.txt",
        )


# ------------------------------------------------------------ visit ordering


def test_visit_order_most_frequent_first_then_word_string():
    vocab = Vocabulary(["bb", "aa", "cc"])
    counts = count_events([["bb", "aa", "cc", "aa"]], vocab)
    # aa twice; bb and cc once each -> tie broken by the string
    order = _visit_order(counts, None, vocab)
    words = [vocab.word(w) for w in order]
    assert words.index("aa") < words.index("bb") < words.index("cc")
    # without a vocabulary ties fall back to the id
    order_ids = _visit_order(counts, None, None)
    assert order_ids.index(vocab.lookup("bb")) < order_ids.index(vocab.lookup("cc"))


def test_visit_order_pools_both_tables():
    vocab = Vocabulary(["aa", "bb"])
    train = count_events([["aa"]], vocab)
    back = count_events([["bb", "bb", "bb"]], vocab)
    order = _visit_order(train, back, vocab)
    assert order.index(vocab.lookup("bb")) < order.index(vocab.lookup("aa"))


# ------------------------------------------------------------- standard runs


def test_standard_run_is_deterministic(tmp_path):
    vocab, counts, cm = block_setup()
    cfg = ExchangeConfig(2, 2)
    t1, t2 = tmp_path / "a.trace", tmp_path / "b.trace"
    r1 = run_exchange(counts, None, cm, cfg, vocab=vocab, trace_path=t1)
    r2 = run_exchange(counts, None, cm, cfg, vocab=vocab, trace_path=t2)
    assert r1.cluster_map.same_assignments(r2.cluster_map)
    assert r1.score == r2.score
    assert [s.moves for s in r1.iterations] == [s.moves for s in r2.iterations]
    assert t1.read_bytes() == t2.read_bytes()


def test_standard_run_leaves_init_untouched():
    vocab, counts, cm = block_setup()
    baseline = cm.copy()
    run_exchange(counts, None, cm, ExchangeConfig(2, 2))
    assert cm.same_assignments(baseline)


def test_standard_run_monotone_and_convergent(tmp_path):
    vocab, counts, cm = block_setup()
    trace = tmp_path / "run.trace"
    result = run_exchange(
        counts, None, cm, ExchangeConfig(2, 2), vocab=vocab, trace_path=trace
    )
    assert result.converged
    assert result.score > run_exchange(
        counts, None, cm, ExchangeConfig(2, 2, max_iterations=1)
    ).iterations[0].sweep_score - 1e-9

    # every applied move strictly improves; the running score never dips
    last_running = -math.inf
    for line in trace.read_text().splitlines():
        it, w, side, src, dst, delta, running = line.split()
        assert side in ("category", "state")
        assert int(src) != int(dst)
        assert float(delta) > 0.0
        assert float(running) >= last_running - 1e-9
        last_running = float(running)

    # iteration-level scores never decrease either
    scores = [s.score for s in result.iterations]
    assert all(b >= a - 1e-9 for a, b in zip(scores, scores[1:]))


def test_standard_finds_block_structure():
    vocab, counts, cm = block_setup()
    result = run_exchange(counts, None, cm, ExchangeConfig(2, 2), vocab=vocab)
    got = result.cluster_map
    p_ids = [vocab.lookup(w) for w in ("p0", "p1", "p2")]
    q_ids = [vocab.lookup(w) for w in ("q0", "q1", "q2")]
    for side_of in (got.state_of, got.category_of):
        assert len({int(side_of[i]) for i in p_ids}) == 1
        assert len({int(side_of[i]) for i in q_ids}) == 1
        assert int(side_of[p_ids[0]]) != int(side_of[q_ids[0]])


def test_converged_run_is_a_fixpoint():
    vocab, counts, cm = block_setup()
    first = run_exchange(counts, None, cm, ExchangeConfig(2, 2))
    again = run_exchange(counts, None, first.cluster_map, ExchangeConfig(2, 2))
    assert again.converged
    assert again.iterations[0].moves == 0
    assert again.score == pytest.approx(first.score, rel=1e-12)
    assert again.cluster_map.same_assignments(first.cluster_map)


def test_iteration_cap_is_respected():
    vocab, counts, cm = block_setup()
    result = run_exchange(counts, None, cm, ExchangeConfig(2, 2, max_iterations=1))
    assert len(result.iterations) == 1


def test_checkpoint_written_and_loadable(tmp_path):
    vocab, counts, cm = block_setup()
    ck = tmp_path / "checkpoint.txt"
    result = run_exchange(
        counts, None, cm, ExchangeConfig(2, 2), vocab=vocab, checkpoint_path=ck
    )
    loaded, fields = load_clusters(ck, vocab)
    assert loaded.same_assignments(result.cluster_map)
    assert int(fields["iteration"]) == len(result.iterations)
    assert float(fields["score"]) == pytest.approx(result.score)


# ------------------------------------------------------------- adaptive runs


def test_adaptive_run_improves_and_reports_lambda():
    vocab, adapt, back, cm = adaptive_setup()
    cfg = ExchangeConfig(4, 4, criterion=ADAPTIVE, max_iterations=8)
    result = run_exchange(adapt, back, cm, cfg, vocab=vocab)
    assert result.lam in cfg.lambda_grid
    assert math.isfinite(result.score)
    for stats in result.iterations:
        assert stats.lam in cfg.lambda_grid
    scores = [s.score for s in result.iterations]
    assert all(b >= a - 1e-9 for a, b in zip(scores, scores[1:]))


def test_adaptive_run_is_deterministic():
    vocab, adapt, back, cm = adaptive_setup()
    cfg = ExchangeConfig(4, 4, criterion=ADAPTIVE, max_iterations=5)
    r1 = run_exchange(adapt, back, cm, cfg, vocab=vocab)
    r2 = run_exchange(adapt, back, cm, cfg, vocab=vocab)
    assert r1.cluster_map.same_assignments(r2.cluster_map)
    assert r1.score == r2.score and r1.lam == r2.lam


def test_optimize_lambda_breaks_ties_toward_larger_weight():
    rng = random.Random(8)
    pairs = [[rng.randint(0, 6) for _ in range(3)] for _ in range(3)]
    a = ClassCounts.from_matrix(pairs)
    b = ClassCounts.from_matrix(pairs)
    cc = combine_counts(a, b, 0.0)
    lam, score = optimize_lambda(cc, (0.0, 0.5, 1.0), Discount(0.5))
    assert lam == 1.0
    assert cc.lam == 1.0
    assert math.isfinite(score)


def test_optimize_lambda_all_degenerate():
    a = ClassCounts.from_matrix([[0, 0], [0, 0]])
    b = ClassCounts.from_matrix([[0, 0], [0, 0]])
    cc = combine_counts(a, b, 0.0)
    lam, score = optimize_lambda(cc, (0.0, 0.5, 1.0), Discount(0.5))
    assert lam == 1.0
    assert score == -math.inf


# ------------------------------------------------------- discount estimation


def test_criterion_discount_forced_or_estimated():
    vocab, counts, _ = block_setup()
    forced = criterion_discount(counts, None, ExchangeConfig(2, 2, discount=0.42))
    assert forced.b == 0.42
    auto = criterion_discount(counts, None, ExchangeConfig(2, 2))
    hist = {}
    for row in counts.rows.values():
        for c in row.values():
            hist[c] = hist.get(c, 0) + 1
    assert auto.b == estimate_discount(hist).b


def test_criterion_discount_pools_background():
    vocab, adapt, back, _ = adaptive_setup()
    pooled = criterion_discount(adapt, back, ExchangeConfig(4, 4, criterion=ADAPTIVE))
    hist = {}
    for table in (adapt, back):
        for row in table.rows.values():
            for c in row.values():
                hist[c] = hist.get(c, 0) + 1
    assert pooled.b == estimate_discount(hist).b
