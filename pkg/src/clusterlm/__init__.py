"""Class bigram language models: exchange clustering, backoff baselines,
count interpolation, and perplexity evaluation."""

from .backoff import BackoffModel, fillup, train_backoff
from .classmodel import (
    ClassModel,
    ClusterMap,
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
    merge_counts,
    read_sentences,
    sentence_ids,
    tokenize_line,
)
from .criterion import (
    AdaptiveObjective,
    ClassCounts,
    CombinedClassCounts,
    StandardObjective,
    adaptive_score,
    aggregate_class_counts,
    combine_counts,
    combine_word_counts,
    loo_score,
    move_delta,
)
from .discounting import Discount, discounted_distribution, estimate_discount
from .errors import (
    ClusterLMError,
    ConfigError,
    FormatError,
    InvalidMoveError,
    ModelIntegrityError,
    VocabMismatchError,
)
from .evaluate import (
    EvalReport,
    SuiteConfig,
    SuiteResult,
    experiment_suite,
    format_report,
    perplexity,
    relative_improvement,
    write_records,
)
from .exchange import (
    ExchangeConfig,
    ExchangeResult,
    IterationStats,
    optimize_lambda,
    run_exchange,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveObjective",
    "BackoffModel",
    "ClassCounts",
    "ClassModel",
    "ClusterLMError",
    "ClusterMap",
    "CombinedClassCounts",
    "ConfigError",
    "CountTable",
    "Discount",
    "EvalReport",
    "ExchangeConfig",
    "ExchangeResult",
    "FormatError",
    "InvalidMoveError",
    "IterationStats",
    "ModelIntegrityError",
    "StandardObjective",
    "SuiteConfig",
    "SuiteResult",
    "Vocabulary",
    "VocabMismatchError",
    "adaptive_score",
    "aggregate_class_counts",
    "build_vocabulary",
    "combine_counts",
    "combine_word_counts",
    "count_events",
    "discounted_distribution",
    "estimate_class_model",
    "estimate_discount",
    "experiment_suite",
    "fillup",
    "format_report",
    "init_clustering",
    "load_clusters",
    "loo_score",
    "merge_counts",
    "move_delta",
    "optimize_lambda",
    "perplexity",
    "read_sentences",
    "relative_improvement",
    "run_exchange",
    "save_clusters",
    "sentence_ids",
    "tokenize_line",
    "train_backoff",
    "write_records",
]
