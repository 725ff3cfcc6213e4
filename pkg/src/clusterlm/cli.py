"""Command-line front end: vocab/counts/train/adapt/eval/report subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .backoff import BACKOFF_MAGIC, BackoffModel, fillup, train_backoff
from .classmodel import (
    CLASSMODEL_MAGIC,
    ClassModel,
    estimate_class_model,
    init_clustering,
    load_clusters,
    save_clusters,
)
from .corpus import (
    CountTable,
    Vocabulary,
    build_vocabulary,
    count_events,
    read_sentences,
)
from .criterion import combine_word_counts
from .discounting import Discount, estimate_discount
from .errors import ClusterLMError, ConfigError, VocabMismatchError
from .evaluate import EvalReport, perplexity
from .exchange import ADAPTIVE, STANDARD, ExchangeConfig, run_exchange

DEFAULTS = {
    "vocab_size": 20000,
    "clusters": 500,
    "cutoff": 1,
    "discount": "auto",
    "max_iterations": 20,
    "lambda_grid": "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
}


def read_config(path) -> dict[str, str]:
    """key=value lines; blank lines and # comments are skipped."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


class Settings:
    """Flag values with config-file and hard-coded fallbacks."""

    def __init__(self, args: argparse.Namespace, config: dict[str, str]):
        self.args = args
        self.config = config

    def get(self, key: str, cast=str):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key, DEFAULTS.get(key))
        if value is None:
            raise ConfigError(f"missing required setting {key!r}")
        return cast(value)

    def discount(self) -> float | None:
        raw = str(self.get("discount"))
        if raw == "auto":
            return None
        return float(raw)

    def lambda_grid(self) -> tuple[float, ...]:
        raw = str(self.get("lambda_grid"))
        try:
            grid = tuple(float(p) for p in raw.split(",") if p.strip() != "")
        except ValueError as exc:
            raise ConfigError(f"bad lambda grid {raw!r}") from exc
        if not grid:
            raise ConfigError("lambda grid is empty")
        return grid


def _load_vocab(path) -> Vocabulary:
    return Vocabulary.load(path)


def _load_counts(path, vocab: Vocabulary) -> CountTable:
    table, md5 = CountTable.load(path)
    if md5 and md5 != vocab.checksum():
        raise VocabMismatchError(
            f"{path}: counts were built for a different vocabulary"
        )
    if table.vocab_size != len(vocab):
        raise VocabMismatchError(f"{path}: counts cover {table.vocab_size} words")
    return table


def _sniff_model(path):
    with open(path, encoding="utf-8") as fh:
        magic = fh.readline().split(" ", 1)[0]
    if magic == BACKOFF_MAGIC:
        return BackoffModel.load(path)
    if magic == CLASSMODEL_MAGIC:
        return ClassModel.load(path)
    raise ConfigError(f"{path}: unrecognized model file")


def _check_model_vocab(model, vocab: Vocabulary, path) -> None:
    if model.vocab_md5 and model.vocab_md5 != vocab.checksum():
        raise VocabMismatchError(
            f"{path}: model was trained on a different vocabulary"
        )


def cmd_vocab(args, settings: Settings) -> int:
    adapt = read_sentences(args.adaptation) if args.adaptation else []
    back = read_sentences(args.background) if args.background else []
    if not adapt and not back:
        raise ConfigError("need at least one of --adaptation/--background")
    vocab = build_vocabulary(adapt, back, settings.get("vocab_size", int))
    vocab.save(args.out)
    print(f"wrote {len(vocab)} words to {args.out}")
    return 0


def cmd_counts(args, settings: Settings) -> int:
    vocab = _load_vocab(args.vocab)
    sentences = read_sentences(args.corpus)
    table = count_events(sentences, vocab)
    table.save(args.out, vocab_md5=vocab.checksum())
    n_bigrams = sum(1 for _ in table.nonzero_bigrams())
    print(f"wrote {n_bigrams} bigrams ({table.total_tokens} events) to {args.out}")
    return 0


def _train_class(counts, vocab, settings, args, label):
    k = settings.get("clusters", int)
    init = init_clustering(counts, k, k, vocab)
    cfg = ExchangeConfig(
        k_states=k,
        k_cats=k,
        criterion=STANDARD,
        max_iterations=settings.get("max_iterations", int),
        discount=settings.discount(),
    )
    result = run_exchange(
        counts, None, init, cfg, vocab=vocab, trace_path=args.trace
    )
    forced = settings.discount()
    model = estimate_class_model(
        counts, result.cluster_map,
        discount=Discount(forced) if forced is not None else None,
        vocab_md5=vocab.checksum(), label=label,
    )
    return model, result


def cmd_train(args, settings: Settings) -> int:
    vocab = _load_vocab(args.vocab)
    counts = _load_counts(args.counts, vocab)
    method = args.method
    if method in ("back_bo", "adapt_bo"):
        forced = settings.discount()
        if forced is not None:
            disc = Discount(forced)
        else:
            hist: dict[int, int] = {}
            for row in counts.rows.values():
                for c in row.values():
                    hist[c] = hist.get(c, 0) + 1
            disc = estimate_discount(hist)
        model = train_backoff(
            counts, disc,
            cutoff=settings.get("cutoff", int),
            vocab_md5=vocab.checksum(),
        )
        model.save(args.out)
        print(f"trained {method} model (b={disc.b:.4f}) -> {args.out}")
        return 0
    if method in ("back_cl", "adapt_cl"):
        model, result = _train_class(counts, vocab, settings, args, method)
        model.save(args.out)
        if args.clusters_out:
            save_clusters(
                args.clusters_out, vocab, result.cluster_map,
                metadata={"iteration": len(result.iterations), "score": result.score},
            )
        print(
            f"trained {method} model in {len(result.iterations)} iterations "
            f"(score {result.score:.4f}) -> {args.out}"
        )
        return 0
    raise ConfigError(f"train does not handle method {method!r}")


def cmd_adapt(args, settings: Settings) -> int:
    vocab = _load_vocab(args.vocab)
    adapt_counts = _load_counts(args.counts, vocab)
    if args.method == "fillup":
        if not args.model:
            raise ConfigError("fillup needs --model (background model)")
        background = _sniff_model(args.model)
        if not isinstance(background, BackoffModel):
            raise ConfigError("fillup adapts a backoff model")
        _check_model_vocab(background, vocab, args.model)
        forced = settings.discount()
        if forced is not None:
            disc = Discount(forced)
        else:
            hist: dict[int, int] = {}
            for row in adapt_counts.rows.values():
                for c in row.values():
                    hist[c] = hist.get(c, 0) + 1
            disc = estimate_discount(hist)
        model = fillup(adapt_counts, background, disc)
        model.save(args.out)
        print(f"fillup model -> {args.out}")
        return 0
    if args.method == "clust_adapt":
        if not args.back_counts or not args.init_clusters:
            raise ConfigError("clust_adapt needs --back-counts and --init-clusters")
        back_counts = _load_counts(args.back_counts, vocab)
        init, _meta = load_clusters(args.init_clusters, vocab)
        cfg = ExchangeConfig(
            k_states=init.k_states,
            k_cats=init.k_cats,
            criterion=ADAPTIVE,
            max_iterations=settings.get("max_iterations", int),
            lambda_grid=settings.lambda_grid(),
            discount=settings.discount(),
        )
        result = run_exchange(
            adapt_counts, back_counts, init, cfg, vocab=vocab, trace_path=args.trace
        )
        combined = combine_word_counts(adapt_counts, back_counts, result.lam)
        forced = settings.discount()
        model = estimate_class_model(
            combined, result.cluster_map,
            discount=Discount(forced) if forced is not None else None,
            vocab_md5=vocab.checksum(), label="clust_adapt",
        )
        model.save(args.out)
        if args.clusters_out:
            save_clusters(
                args.clusters_out, vocab, result.cluster_map,
                metadata={
                    "iteration": len(result.iterations),
                    "score": result.score,
                    "lambda": result.lam,
                },
            )
        print(
            f"adapted model (lambda {result.lam:.2f}, "
            f"{len(result.iterations)} iterations) -> {args.out}"
        )
        return 0
    raise ConfigError(f"adapt does not handle method {args.method!r}")


def cmd_eval(args, settings: Settings) -> int:
    vocab = _load_vocab(args.vocab)
    model = _sniff_model(args.model)
    _check_model_vocab(model, vocab, args.model)
    if getattr(model, "vocab_size", len(vocab)) != len(vocab):
        raise VocabMismatchError(f"{args.model}: vocabulary size mismatch")
    sentences = read_sentences(args.heldout)
    label = getattr(model, "label", None) or getattr(model, "kind", "model")
    report = perplexity(
        model.prob, sentences, vocab,
        score_oov=args.score_oov,
        model_id=args.model_id or label,
        vocab_md5=vocab.checksum(),
    )
    line = (
        f"{report.model_id}: PP {report.perplexity:.3f} "
        f"({report.tokens_scored} tokens, {100 * report.oov_rate:.2f}% OOV)"
    )
    print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_report(args, settings: Settings) -> int:
    rows: list[dict] = []
    for path in args.records:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if isinstance(payload, dict) and "records" in payload:
            rows.extend(payload["records"])
        elif isinstance(payload, dict):
            rows.append(payload)
        else:
            rows.extend(payload)
    if not rows:
        raise ConfigError("no evaluation records given")
    rows.sort(key=lambda r: (str(r.get("model_id", "")), r.get("size") or 0))
    lines = [f"{'model':<24} {'PP':>12} {'OOV%':>7} {'tokens':>9}"]
    for r in rows:
        lines.append(
            f"{r.get('model_id', '?'):<24} {r.get('perplexity', float('nan')):>12.3f} "
            f"{100 * r.get('oov_rate', 0.0):>6.2f}% {r.get('tokens_scored', 0):>9}"
        )
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clusterlm",
        description="class bigram language models with exchange clustering",
    )
    parser.add_argument("--config", help="key=value settings file")
    parser.add_argument("--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build a vocabulary from corpora")
    p.add_argument("--adaptation", help="adaptation corpus (takes priority)")
    p.add_argument("--background", help="background corpus")
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("counts", help="count bigram events")
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_counts)

    p = sub.add_parser("train", help="train a model from counts")
    p.add_argument(
        "--method", required=True,
        choices=["back_bo", "back_cl", "adapt_bo", "adapt_cl"],
    )
    p.add_argument("--vocab", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--discount")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--clusters-out", dest="clusters_out")
    p.add_argument("--trace")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("adapt", help="adapt a background model")
    p.add_argument("--method", required=True, choices=["fillup", "clust_adapt"])
    p.add_argument("--vocab", required=True)
    p.add_argument("--counts", required=True, help="adaptation counts")
    p.add_argument("--model", help="background backoff model (fillup)")
    p.add_argument("--back-counts", dest="back_counts")
    p.add_argument("--init-clusters", dest="init_clusters")
    p.add_argument("--out", required=True)
    p.add_argument("--discount")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--lambda-grid", dest="lambda_grid")
    p.add_argument("--clusters-out", dest="clusters_out")
    p.add_argument("--trace")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("eval", help="perplexity on held-out text")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--heldout", required=True)
    p.add_argument("--score-oov", dest="score_oov", action="store_true")
    p.add_argument("--model-id", dest="model_id")
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="tabulate evaluation records")
    p.add_argument("records", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    config = read_config(args.config) if args.config else {}
    settings = Settings(args, config)
    try:
        return args.func(args, settings)
    except ClusterLMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
