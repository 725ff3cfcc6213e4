"""Greedy exchange clustering over the two-sided class map.

Each iteration sweeps every movable word twice -- once proposing category
moves, once proposing state moves -- applying the single best strictly
improving reassignment per word.  The adaptive variant re-optimizes the
interpolation weight on a fixed grid after every iteration.  Everything is
deterministic: fixed visit order, first-best tie breaking toward low cluster
ids, no randomness anywhere.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from .classmodel import ClusterMap, save_clusters
from .corpus import CountTable, Vocabulary
from .criterion import (
    CATEGORY_SIDE,
    NEG_INF,
    STATE_SIDE,
    AdaptiveObjective,
    CombinedClassCounts,
    StandardObjective,
    adaptive_score,
)
from .discounting import Discount, estimate_discount
from .errors import ConfigError

log = logging.getLogger(__name__)

STANDARD = "standard"
ADAPTIVE = "adaptive"

DEFAULT_LAMBDA_GRID = tuple(i / 10.0 for i in range(11))


@dataclass
class ExchangeConfig:
    k_states: int
    k_cats: int
    criterion: str = STANDARD
    max_iterations: int = 20
    rel_threshold: float = 1e-6
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    discount: float | None = None

    def validate(self) -> None:
        if self.criterion not in (STANDARD, ADAPTIVE):
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not self.lambda_grid:
            raise ConfigError("lambda grid is empty")
        if any(not 0.0 <= g <= 1.0 for g in self.lambda_grid):
            raise ConfigError("lambda grid values must lie in [0, 1]")


@dataclass
class IterationStats:
    iteration: int
    moves: int
    sweep_score: float
    lam: float | None
    score: float


@dataclass
class ExchangeResult:
    cluster_map: ClusterMap
    score: float
    lam: float | None
    iterations: list[IterationStats] = field(default_factory=list)
    converged: bool = False


def optimize_lambda(
    cc: CombinedClassCounts, grid, discount: Discount
) -> tuple[float, float]:
    """Grid argmax of the adaptive score; ties go to the larger weight.

    Leaves ``cc`` set to the winning weight.  If every grid point is
    degenerate the largest weight is returned with score -inf.
    """
    best_lam = None
    best_score = NEG_INF
    for lam in grid:
        cc.set_lambda(lam)
        s = adaptive_score(cc, discount)
        if best_lam is None or s >= best_score:
            best_lam, best_score = lam, s
    cc.set_lambda(best_lam)
    return float(best_lam), best_score


def _bigram_histogram(counts: CountTable) -> Counter:
    hist: Counter = Counter()
    for row in counts.rows.values():
        for c in row.values():
            hist[int(c)] += 1
    return hist


def criterion_discount(
    train_counts: CountTable, back_counts: CountTable | None, cfg: ExchangeConfig
) -> Discount:
    """Discount used inside the objective: forced, or estimated from the
    pooled bigram count-of-count histogram of the training table(s)."""
    if cfg.discount is not None:
        return Discount(cfg.discount)
    hist = _bigram_histogram(train_counts)
    if back_counts is not None:
        hist.update(_bigram_histogram(back_counts))
    return estimate_discount(hist)


def _visit_order(
    train_counts: CountTable,
    back_counts: CountTable | None,
    vocab: Vocabulary | None,
) -> list[int]:
    weight = train_counts.unigram.copy()
    if back_counts is not None:
        weight = weight + back_counts.unigram
    ids = range(len(weight))
    if vocab is not None:
        return sorted(ids, key=lambda w: (-int(weight[w]), vocab.word(w)))
    return sorted(ids, key=lambda w: (-int(weight[w]), w))


def run_exchange(
    train_counts: CountTable,
    back_counts: CountTable | None,
    init: ClusterMap,
    cfg: ExchangeConfig,
    discount: Discount | None = None,
    vocab: Vocabulary | None = None,
    trace_path=None,
    checkpoint_path=None,
) -> ExchangeResult:
    """Run exchange clustering from ``init`` until convergence or the
    iteration cap.

    ``back_counts`` must be given exactly when the adaptive criterion is
    selected.  The returned map is a copy; ``init`` is left untouched.
    """
    cfg.validate()
    adaptive = cfg.criterion == ADAPTIVE
    if adaptive and back_counts is None:
        raise ConfigError("adaptive criterion needs background counts")
    if not adaptive and back_counts is not None:
        raise ConfigError("background counts are only used by the adaptive criterion")
    if checkpoint_path is not None and vocab is None:
        raise ConfigError("checkpointing needs the vocabulary")

    cm = init.copy()
    if discount is None:
        discount = criterion_discount(train_counts, back_counts, cfg)
    if adaptive:
        engine = AdaptiveObjective(train_counts, back_counts, cm, discount)
        lam, score = optimize_lambda(engine.cc, cfg.lambda_grid, discount)
        log.info("initial lambda %.2f, score %.6f", lam, score)
    else:
        engine = StandardObjective(train_counts, cm, discount)
        lam = None
        score = engine.score()

    order = _visit_order(train_counts, back_counts, vocab)
    trace = open(trace_path, "w", encoding="utf-8") if trace_path else None
    result = ExchangeResult(cm, score, lam)
    try:
        prev = score
        running = score
        for it in range(1, cfg.max_iterations + 1):
            moves = 0
            for side in (CATEGORY_SIDE, STATE_SIDE):
                assign = cm.category_of if side == CATEGORY_SIDE else cm.state_of
                for w in order:
                    if engine.frozen(w, side):
                        continue
                    best = engine.best_move(w, side)
                    if best is None:
                        continue
                    dst, delta = best
                    src = int(assign[w])
                    engine.apply_move(w, side, dst)
                    moves += 1
                    running += delta
                    if trace:
                        trace.write(
                            f"{it} {w} {side} {src} {dst} {float(delta)!r} {float(running)!r}\n"
                        )
            sweep_score = engine.score()
            running = sweep_score
            if adaptive:
                lam, score = optimize_lambda(engine.cc, cfg.lambda_grid, discount)
                running = score
            else:
                score = sweep_score
            result.iterations.append(
                IterationStats(it, moves, sweep_score, lam, score)
            )
            log.info(
                "iteration %d: %d moves, score %.6f%s",
                it, moves, score, "" if lam is None else f", lambda {lam:.2f}",
            )
            if checkpoint_path is not None:
                meta = {"iteration": it, "score": score}
                if lam is not None:
                    meta["lambda"] = lam
                save_clusters(checkpoint_path, vocab, cm, metadata=meta)
            if moves == 0:
                result.converged = True
                break
            rel = (score - prev) / max(1.0, abs(prev))
            if rel < cfg.rel_threshold:
                result.converged = True
                break
            prev = score
    finally:
        if trace:
            trace.close()

    result.score = score
    result.lam = lam
    return result
