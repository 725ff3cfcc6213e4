"""Two-factor class bigram model: cluster maps, estimation, and querying.

The model factors p(w | context) into p(class-of-w | state-of-context) times
p(w | class-of-w).  Both mapping functions are plain arrays over word ids.
The context side is specialized to the single preceding word, so states and
categories both partition the vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import CountTable, Vocabulary
from .discounting import Discount, discounted_distribution, estimate_discount
from .errors import ConfigError, FormatError

CLUSTERS_MAGIC = "clusterlm-clusters"
CLASSMODEL_MAGIC = "clusterlm-classmodel"


class ClusterMap:
    """State and category assignments for every word id.

    ``n_states``/``n_cats`` are the full cluster ranges of the count tables;
    ``k_states``/``k_cats`` bound the ids regular words may move between.
    Clusters in the gap are dedicated to frozen tokens: the begin marker owns
    the extra state, the end and unknown markers own the extra categories.
    """

    def __init__(
        self,
        state_of: Iterable[int],
        category_of: Iterable[int],
        n_states: int,
        n_cats: int,
        k_states: int | None = None,
        k_cats: int | None = None,
        frozen_states: Iterable[int] = (),
        frozen_cats: Iterable[int] = (),
    ):
        self.state_of = np.array(state_of, dtype=np.int64)
        self.category_of = np.array(category_of, dtype=np.int64)
        if self.state_of.shape != self.category_of.shape:
            raise ConfigError("state and category maps must cover the same words")
        self.n_states = n_states
        self.n_cats = n_cats
        self.k_states = n_states if k_states is None else k_states
        self.k_cats = n_cats if k_cats is None else k_cats
        self.frozen_states = frozenset(frozen_states)
        self.frozen_cats = frozenset(frozen_cats)
        if self.state_of.size and (
            self.state_of.max() >= n_states or self.category_of.max() >= n_cats
        ):
            raise ConfigError("cluster id out of range")

    @property
    def vocab_size(self) -> int:
        return len(self.state_of)

    def copy(self) -> "ClusterMap":
        return ClusterMap(
            self.state_of.copy(),
            self.category_of.copy(),
            self.n_states,
            self.n_cats,
            self.k_states,
            self.k_cats,
            self.frozen_states,
            self.frozen_cats,
        )

    def same_assignments(self, other: "ClusterMap") -> bool:
        return (
            self.n_states == other.n_states
            and self.n_cats == other.n_cats
            and bool(np.array_equal(self.state_of, other.state_of))
            and bool(np.array_equal(self.category_of, other.category_of))
        )


def init_clustering(
    counts: CountTable, k_states: int, k_cats: int, vocab: Vocabulary
) -> ClusterMap:
    """Deterministic frequency-based initialization.

    Regular words are sorted by descending unigram count (ties break on the
    word string); the top k-1 become singleton clusters 0..k-2 and everything
    else starts in the shared cluster k-1, independently on each side.
    Reserved tokens take the dedicated clusters appended after the regular
    range: the begin marker gets state k_states, the end and unknown markers
    get categories k_cats and k_cats+1.
    """
    if k_states < 2 or k_cats < 2:
        raise ConfigError("need at least 2 clusters per side")
    vocab_size = len(vocab)
    if counts.vocab_size != vocab_size:
        raise ConfigError("counts and vocabulary disagree on size")
    eligible = [w for w in range(vocab_size) if w >= 3]
    if k_states > len(eligible) or k_cats > len(eligible):
        raise ConfigError(
            f"cluster count exceeds the {len(eligible)} clusterable words"
        )
    order = sorted(eligible, key=lambda w: (-int(counts.unigram[w]), vocab.word(w)))

    state_of = np.empty(vocab_size, dtype=np.int64)
    category_of = np.empty(vocab_size, dtype=np.int64)
    for rank, w in enumerate(order):
        state_of[w] = rank if rank < k_states - 1 else k_states - 1
        category_of[w] = rank if rank < k_cats - 1 else k_cats - 1
    state_of[vocab.bos_id] = k_states
    state_of[vocab.eos_id] = k_states - 1
    state_of[vocab.unk_id] = k_states - 1
    category_of[vocab.bos_id] = k_cats - 1
    category_of[vocab.eos_id] = k_cats
    category_of[vocab.unk_id] = k_cats + 1

    return ClusterMap(
        state_of,
        category_of,
        n_states=k_states + 1,
        n_cats=k_cats + 2,
        k_states=k_states,
        k_cats=k_cats,
        frozen_states={vocab.bos_id},
        frozen_cats={vocab.eos_id, vocab.unk_id},
    )


def save_clusters(
    path: str | Path,
    vocab: Vocabulary,
    cm: ClusterMap,
    metadata: dict[str, object] | None = None,
) -> None:
    """Write `word state_id category_id` lines under a provenance header."""
    with open(path, "w", encoding="utf-8") as fh:
        head = (
            f"{CLUSTERS_MAGIC} vocab_size={cm.vocab_size} "
            f"n_states={cm.n_states} n_cats={cm.n_cats} "
            f"k_states={cm.k_states} k_cats={cm.k_cats} "
            f"frozen_states={_id_list(cm.frozen_states)} "
            f"frozen_cats={_id_list(cm.frozen_cats)} "
            f"vocab_md5={vocab.checksum()}"
        )
        if metadata:
            for key in sorted(metadata):
                value = metadata[key]
                head += (
                    f" {key}={float(value)!r}"
                    if isinstance(value, float)
                    else f" {key}={value}"
                )
        fh.write(head + "\n")
        for w in range(cm.vocab_size):
            fh.write(
                f"{vocab.word(w)} {int(cm.state_of[w])} {int(cm.category_of[w])}\n"
            )


def _id_list(ids: Iterable[int]) -> str:
    ids = sorted(ids)
    return ",".join(str(i) for i in ids) if ids else "-"


def _parse_id_list(text: str) -> frozenset[int]:
    if text == "-":
        return frozenset()
    return frozenset(int(p) for p in text.split(","))


def load_clusters(
    path: str | Path, vocab: Vocabulary
) -> tuple[ClusterMap, dict[str, str]]:
    """Read a cluster file; returns the map and the header fields."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header or header[0] != CLUSTERS_MAGIC:
            raise FormatError(f"{path}: not a cluster file")
        fields = dict(kv.split("=", 1) for kv in header[1:])
        try:
            vocab_size = int(fields["vocab_size"])
            n_states = int(fields["n_states"])
            n_cats = int(fields["n_cats"])
            k_states = int(fields["k_states"])
            k_cats = int(fields["k_cats"])
            frozen_states = _parse_id_list(fields["frozen_states"])
            frozen_cats = _parse_id_list(fields["frozen_cats"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: bad cluster file header") from exc
        if vocab_size != len(vocab):
            raise FormatError(
                f"{path}: cluster file is for a {vocab_size}-word vocabulary, "
                f"got {len(vocab)} words"
            )
        state_of = np.full(vocab_size, -1, dtype=np.int64)
        category_of = np.full(vocab_size, -1, dtype=np.int64)
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'word state cat'")
            word, s, g = parts
            if word not in vocab:
                raise FormatError(f"{path}:{lineno}: unknown word {word!r}")
            wid = vocab.ids[word]
            state_of[wid] = int(s)
            category_of[wid] = int(g)
    if (state_of < 0).any():
        raise FormatError(f"{path}: cluster file does not cover the vocabulary")
    cm = ClusterMap(
        state_of, category_of, n_states, n_cats, k_states, k_cats,
        frozen_states, frozen_cats,
    )
    return cm, fields


class ClassModel:
    """Estimated class bigram model over a fixed clustering.

    p(g|s) is stored as a sparse discounted component per state plus a
    per-state weight on the shared category fallback distribution; p(w|g) is
    stored densely per word.  Log10 values are canonical, mirroring the file
    format, and linear probabilities are derived from them.
    """

    def __init__(
        self,
        cm: ClusterMap,
        state_disc_lp: dict[int, dict[int, float]],
        state_alpha: np.ndarray,
        cat_fallback_lp: dict[int, float],
        word_lp: np.ndarray,
        b_pairs: float,
        b_cats: float,
        b_words: float,
        vocab_md5: str = "",
        label: str = "class",
    ):
        self.cm = cm
        self.state_disc_lp = state_disc_lp
        self.state_alpha = state_alpha
        self.cat_fallback_lp = cat_fallback_lp
        self.word_lp = word_lp
        self.b_pairs = b_pairs
        self.b_cats = b_cats
        self.b_words = b_words
        self.vocab_md5 = vocab_md5
        self.label = label
        self.q = np.zeros(cm.n_cats)
        for g, lp in cat_fallback_lp.items():
            self.q[g] = 10.0 ** lp
        self.word_p = np.power(10.0, word_lp)

    @property
    def vocab_size(self) -> int:
        return self.cm.vocab_size

    def class_given_state(self, s: int, g: int) -> float:
        row = self.state_disc_lp.get(s)
        disc = 10.0 ** row[g] if row is not None and g in row else 0.0
        return disc + self.state_alpha[s] * self.q[g]

    def prob(self, context: int, w: int) -> float:
        s = self.cm.state_of[context]
        g = self.cm.category_of[w]
        return self.class_given_state(s, g) * self.word_p[w]

    def save(self, path: str | Path) -> None:
        cm = self.cm
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                f"{CLASSMODEL_MAGIC} label={self.label} "
                f"vocab_size={cm.vocab_size} "
                f"n_states={cm.n_states} n_cats={cm.n_cats} "
                f"k_states={cm.k_states} k_cats={cm.k_cats} "
                f"frozen_states={_id_list(cm.frozen_states)} "
                f"frozen_cats={_id_list(cm.frozen_cats)} "
                f"b_pairs={self.b_pairs!r} b_cats={self.b_cats!r} "
                f"b_words={self.b_words!r} vocab_md5={self.vocab_md5}\n"
            )
            fh.write("\\clusters:\n")
            for w in range(cm.vocab_size):
                fh.write(f"{w} {int(cm.state_of[w])} {int(cm.category_of[w])}\n")
            fh.write("\\state-bigrams:\n")
            for s in sorted(self.state_disc_lp):
                row = self.state_disc_lp[s]
                for g in sorted(row):
                    fh.write(f"{s} {g} {row[g]!r}\n")
            fh.write("\\state-alphas:\n")
            for s in range(cm.n_states):
                fh.write(f"{s} {float(self.state_alpha[s])!r}\n")
            fh.write("\\category-unigrams:\n")
            for g in sorted(self.cat_fallback_lp):
                fh.write(f"{g} {self.cat_fallback_lp[g]!r}\n")
            fh.write("\\word-unigrams:\n")
            for w in range(cm.vocab_size):
                fh.write(f"{w} {float(self.word_lp[w])!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "ClassModel":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if not header or header[0] != CLASSMODEL_MAGIC:
                raise FormatError(f"{path}: not a class model file")
            fields = dict(kv.split("=", 1) for kv in header[1:])
            try:
                vocab_size = int(fields["vocab_size"])
                n_states = int(fields["n_states"])
                n_cats = int(fields["n_cats"])
                k_states = int(fields["k_states"])
                k_cats = int(fields["k_cats"])
                frozen_states = _parse_id_list(fields["frozen_states"])
                frozen_cats = _parse_id_list(fields["frozen_cats"])
                b_pairs = float(fields["b_pairs"])
                b_cats = float(fields["b_cats"])
                b_words = float(fields["b_words"])
                label = fields.get("label", "class")
                vocab_md5 = fields.get("vocab_md5", "")
            except (KeyError, ValueError) as exc:
                raise FormatError(f"{path}: bad class model header") from exc

            state_of = np.full(vocab_size, -1, dtype=np.int64)
            category_of = np.full(vocab_size, -1, dtype=np.int64)
            state_disc_lp: dict[int, dict[int, float]] = {}
            state_alpha = np.zeros(n_states)
            cat_fallback_lp: dict[int, float] = {}
            word_lp = np.zeros(vocab_size)
            section = None
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if line.startswith("\\"):
                    section = line
                    continue
                parts = line.split()
                if section == "\\clusters:" and len(parts) == 3:
                    w = int(parts[0])
                    state_of[w] = int(parts[1])
                    category_of[w] = int(parts[2])
                elif section == "\\state-bigrams:" and len(parts) == 3:
                    state_disc_lp.setdefault(int(parts[0]), {})[int(parts[1])] = (
                        float(parts[2])
                    )
                elif section == "\\state-alphas:" and len(parts) == 2:
                    state_alpha[int(parts[0])] = float(parts[1])
                elif section == "\\category-unigrams:" and len(parts) == 2:
                    cat_fallback_lp[int(parts[0])] = float(parts[1])
                elif section == "\\word-unigrams:" and len(parts) == 2:
                    word_lp[int(parts[0])] = float(parts[1])
                else:
                    raise FormatError(f"{path}:{lineno}: unparseable model line")
        if (state_of < 0).any():
            raise FormatError(f"{path}: cluster section does not cover vocabulary")
        cm = ClusterMap(
            state_of, category_of, n_states, n_cats, k_states, k_cats,
            frozen_states, frozen_cats,
        )
        return cls(
            cm, state_disc_lp, state_alpha, cat_fallback_lp, word_lp,
            b_pairs, b_cats, b_words, vocab_md5=vocab_md5, label=label,
        )


def _positive_histogram(values: np.ndarray) -> Counter:
    return Counter(int(v) for v in values.ravel() if v > 0)


def estimate_class_model(
    counts: CountTable,
    cm: ClusterMap,
    discount: Discount | None = None,
    vocab_md5: str = "",
    label: str = "class",
) -> ClassModel:
    """Estimate the two factors from bigram counts under a fixed clustering.

    Every quantity is derived from the bigram cells, so the same code serves
    plain and interpolated count tables.  With ``discount`` unset, separate
    discounts are estimated for the class transition cells, the category
    totals, and the word counts.
    """
    if counts.vocab_size != cm.vocab_size:
        raise ConfigError("counts and cluster map disagree on vocabulary size")
    S = cm.state_of
    G = cm.category_of
    n_states, n_cats = cm.n_states, cm.n_cats

    pairs = np.zeros((n_states, n_cats), dtype=np.int64)
    word_weight = np.zeros(cm.vocab_size, dtype=np.int64)
    for v, row in counts.rows.items():
        s = S[v]
        for w, c in row.items():
            pairs[s, G[w]] += c
            word_weight[w] += c
    cat_tot = pairs.sum(axis=0)

    members: list[list[int]] = [[] for _ in range(n_cats)]
    for w in range(cm.vocab_size):
        members[G[w]].append(w)
    nonempty = [g for g in range(n_cats) if members[g]]
    if not nonempty:
        raise ConfigError("cannot estimate a model over an empty vocabulary")

    b_pairs = discount or estimate_discount(_positive_histogram(pairs))
    b_cats = discount or estimate_discount(_positive_histogram(cat_tot))
    b_words = discount or estimate_discount(_positive_histogram(word_weight))

    # Category fallback: discounted category unigram over nonempty categories.
    uniform_cats = np.zeros(n_cats)
    uniform_cats[nonempty] = 1.0 / len(nonempty)
    q = discounted_distribution(cat_tot, b_cats, uniform_cats)
    cat_fallback_lp = {g: math.log10(q[g]) for g in nonempty}

    state_disc_lp: dict[int, dict[int, float]] = {}
    state_alpha = np.zeros(n_states)
    for s in range(n_states):
        row = pairs[s]
        total = int(row.sum())
        if total == 0:
            state_alpha[s] = 1.0
            continue
        seen = np.nonzero(row)[0]
        state_alpha[s] = b_pairs.b * len(seen) / total
        state_disc_lp[s] = {
            int(g): math.log10((row[g] - b_pairs.b) / total) for g in seen
        }

    word_lp = np.zeros(cm.vocab_size)
    for g in nonempty:
        ids = np.array(members[g], dtype=np.int64)
        dist = discounted_distribution(
            word_weight[ids], b_words, np.full(len(ids), 1.0 / len(ids))
        )
        word_lp[ids] = np.log10(dist)

    return ClassModel(
        cm, state_disc_lp, state_alpha, cat_fallback_lp, word_lp,
        b_pairs.b, b_cats.b, b_words.b, vocab_md5=vocab_md5, label=label,
    )
