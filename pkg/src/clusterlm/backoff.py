"""Backoff bigram model with absolute discounting, plus fill-up adaptation.

A trained model keeps log10 probabilities as its canonical values (the same
numbers its file format stores); linear probabilities are derived via 10**lp
so that a model and its saved file always agree bit for bit.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .corpus import CountTable
from .discounting import Discount, discounted_distribution
from .errors import ConfigError, FormatError

BACKOFF_MAGIC = "clusterlm-backoff"


class BackoffModel:
    """Explicit discounted bigrams, per-context backoff mass, unigram tail.

    A query returns the explicit probability when one is stored, otherwise
    alpha(v) * p_uni(w) / Z(v) where Z(v) renormalizes the unigram over the
    words without an explicit entry after v.
    """

    def __init__(
        self,
        vocab_size: int,
        b: float,
        cutoff: int,
        uni_lp: np.ndarray,
        kind: str = "backoff",
        vocab_md5: str = "",
    ):
        self.vocab_size = vocab_size
        self.b = b
        self.cutoff = cutoff
        self.kind = kind
        self.vocab_md5 = vocab_md5
        self.explicit_lp: dict[int, dict[int, float]] = {}
        self.alpha: dict[int, float] = {}
        self.uni_lp = uni_lp
        self.p_uni = np.power(10.0, uni_lp)
        self._tail_z: dict[int, float] = {}

    def tail_z(self, v: int) -> float:
        """Unigram mass left for the non-explicit words after v (lazy, cached)."""
        z = self._tail_z.get(v)
        if z is None:
            row = self.explicit_lp.get(v)
            if row:
                z = max(1.0 - sum(self.p_uni[w] for w in row), 0.0)
            else:
                z = 1.0
            self._tail_z[v] = z
        return z

    def prob(self, v: int, w: int) -> float:
        row = self.explicit_lp.get(v)
        if row is not None:
            lp = row.get(w)
            if lp is not None:
                return 10.0 ** lp
        return self.alpha.get(v, 1.0) * self.p_uni[w] / self.tail_z(v)

    def set_explicit(self, v: int, w: int, p: float) -> None:
        self.explicit_lp.setdefault(v, {})[w] = math.log10(p)
        self._tail_z.pop(v, None)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                f"{BACKOFF_MAGIC} kind={self.kind} vocab_size={self.vocab_size} "
                f"b={self.b!r} cutoff={self.cutoff} vocab_md5={self.vocab_md5}\n"
            )
            fh.write("\\bigrams:\n")
            for v in sorted(self.explicit_lp):
                row = self.explicit_lp[v]
                for w in sorted(row):
                    fh.write(f"{v} {w} {row[w]!r}\n")
            fh.write("\\contexts:\n")
            for v in sorted(self.alpha):
                fh.write(f"{v} {float(self.alpha[v])!r}\n")
            fh.write("\\unigrams:\n")
            for w in range(self.vocab_size):
                fh.write(f"{w} {float(self.uni_lp[w])!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "BackoffModel":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if not header or header[0] != BACKOFF_MAGIC:
                raise FormatError(f"{path}: not a backoff model file")
            fields = dict(kv.split("=", 1) for kv in header[1:])
            try:
                vocab_size = int(fields["vocab_size"])
                b = float(fields["b"])
                cutoff = int(fields["cutoff"])
                kind = fields.get("kind", "backoff")
                vocab_md5 = fields.get("vocab_md5", "")
            except (KeyError, ValueError) as exc:
                raise FormatError(f"{path}: bad model header") from exc

            uni_lp = np.zeros(vocab_size, dtype=np.float64)
            model = cls(vocab_size, b, cutoff, uni_lp, kind=kind, vocab_md5=vocab_md5)
            section = None
            seen_uni = 0
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if line.startswith("\\"):
                    section = line
                    continue
                parts = line.split()
                if section == "\\bigrams:" and len(parts) == 3:
                    v, w = int(parts[0]), int(parts[1])
                    model.explicit_lp.setdefault(v, {})[w] = float(parts[2])
                elif section == "\\contexts:" and len(parts) == 2:
                    model.alpha[int(parts[0])] = float(parts[1])
                elif section == "\\unigrams:" and len(parts) == 2:
                    uni_lp[int(parts[0])] = float(parts[1])
                    seen_uni += 1
                else:
                    raise FormatError(f"{path}:{lineno}: unparseable model line")
            if seen_uni != vocab_size:
                raise FormatError(
                    f"{path}: expected {vocab_size} unigram lines, got {seen_uni}"
                )
        model.p_uni = np.power(10.0, model.uni_lp)
        return model


def _quantize(p: float) -> tuple[float, float]:
    """Round-trip a probability through its stored log10 form."""
    lp = math.log10(p)
    return lp, 10.0 ** lp


def _unigram_lp(counts: CountTable, discount: Discount) -> np.ndarray:
    uniform = np.full(counts.vocab_size, 1.0 / counts.vocab_size)
    p = discounted_distribution(counts.unigram, discount, uniform)
    return np.log10(p)


def train_backoff(
    counts: CountTable, discount: Discount, cutoff: int = 1, vocab_md5: str = ""
) -> BackoffModel:
    """Train a discounted backoff bigram model.

    Bigrams with count <= cutoff are dropped before discounting; their mass
    joins the per-context backoff reserve so every context still sums to one.
    """
    if counts.total_tokens == 0:
        raise ConfigError("cannot train a backoff model from empty counts")
    b = discount.b
    model = BackoffModel(
        counts.vocab_size, b, cutoff, _unigram_lp(counts, discount),
        vocab_md5=vocab_md5,
    )
    for v, row in counts.rows.items():
        total = sum(row.values())
        retained = {w: c for w, c in row.items() if c > cutoff}
        if not retained:
            model.alpha[v] = 1.0
            continue
        dropped = total - sum(retained.values())
        reserve = (b * len(retained) + dropped) / total
        if len(retained) == model.vocab_size:
            # No tail word left; scale the reserve back into the explicits.
            for w, c in retained.items():
                model.set_explicit(v, w, (c - b) / total / (1.0 - reserve))
            model.alpha[v] = 0.0
            continue
        for w, c in retained.items():
            model.set_explicit(v, w, (c - b) / total)
        model.alpha[v] = reserve
    return model


def fillup(
    adapt_counts: CountTable, background: BackoffModel, discount: Discount
) -> BackoffModel:
    """Adapt a background model by filling around adaptation estimates.

    Contexts observed in the adaptation data keep discounted adaptation
    estimates for their observed bigrams; the reserved mass is spread over the
    remaining words proportionally to the background model's conditional
    distribution.  Contexts never observed in the adaptation data copy the
    background distribution unchanged.
    """
    if adapt_counts.vocab_size != background.vocab_size:
        raise ConfigError("fill-up requires a shared vocabulary")
    b = discount.b
    model = BackoffModel(
        background.vocab_size,
        b,
        background.cutoff,
        background.uni_lp.copy(),
        kind="fillup",
        vocab_md5=background.vocab_md5,
    )

    adapt_rows = {v: row for v, row in adapt_counts.rows.items() if row}
    for v, row in adapt_rows.items():
        total = sum(row.values())
        reserve = b * len(row) / total
        for w, c in row.items():
            model.set_explicit(v, w, (c - b) / total)

        # Background mass over the words not observed after v in adaptation.
        bg_remaining = 1.0 - sum(background.prob(v, w) for w in row)
        if bg_remaining <= 0.0:
            # Background left nothing to shape the fill; renormalize instead.
            scale = 1.0 / (1.0 - reserve)
            for w, c in row.items():
                model.set_explicit(v, w, (c - b) / total * scale)
            model.alpha[v] = 0.0
            continue
        scale = reserve / bg_remaining

        bg_row = background.explicit_lp.get(v, {})
        for w, lp in bg_row.items():
            if w not in row:
                model.set_explicit(v, w, scale * 10.0 ** lp)
        bg_tail = background.alpha.get(v, 1.0) / background.tail_z(v)
        fill_z = max(
            1.0 - sum(model.p_uni[w] for w in model.explicit_lp[v]), 0.0
        )
        model.alpha[v] = scale * bg_tail * fill_z

    for v, bg_row in background.explicit_lp.items():
        if v not in adapt_rows:
            model.explicit_lp[v] = dict(bg_row)
    for v, a in background.alpha.items():
        if v not in adapt_rows:
            model.alpha[v] = a
    return model
