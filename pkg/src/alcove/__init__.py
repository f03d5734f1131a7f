"""alcove: active learning query strategies and benchmarks on precomputed embeddings."""

from .classifier import (
    LinearClassifier,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    mc_dropout_proba,
    predict_proba,
    train,
    zero_classifier,
)
from .dataset_io import EmbeddingDataset, PoolState, generate_synthetic, load_dataset, save_dataset
from .geometry import (
    Clustering,
    greedy_k_center,
    kmeans,
    kmeanspp_seed,
    knn,
    nearest_to_centroids,
    pairwise_sq_dist,
)
from .harness import BenchResult, RunConfig, RunRecord, run_al, run_bench
from .initpool import centroid_init, random_init
from .semisup import PropagationResult, build_knn_graph, label_propagate
from .stats import T_CRITICAL, WinMatrix, paired_t_stat, win_fraction, win_matrix
from .strategies import (
    STRATEGY_KINDS,
    QueryResult,
    QuerySpec,
    StrategyUnavailable,
    badge_sq_dist,
    diversify,
    dropquery,
    estimate_delta,
    query,
    query_alfamix,
    query_badge,
    query_coreset,
    query_powerbald,
    query_probcover,
    query_typiclust,
    score_bald,
    score_entropy,
    score_margin,
    score_uncertainty,
    select_topb,
    typicality,
)

__all__ = [
    "BenchResult",
    "Clustering",
    "EmbeddingDataset",
    "LinearClassifier",
    "PoolState",
    "PropagationResult",
    "QueryResult",
    "QuerySpec",
    "RunConfig",
    "RunRecord",
    "STRATEGY_KINDS",
    "StrategyUnavailable",
    "T_CRITICAL",
    "TrainConfig",
    "TrainingDiverged",
    "WinMatrix",
    "badge_sq_dist",
    "build_knn_graph",
    "centroid_init",
    "diversify",
    "dropquery",
    "estimate_delta",
    "evaluate",
    "generate_synthetic",
    "greedy_k_center",
    "kmeans",
    "kmeanspp_seed",
    "knn",
    "label_propagate",
    "load_dataset",
    "mc_dropout_proba",
    "nearest_to_centroids",
    "paired_t_stat",
    "pairwise_sq_dist",
    "predict_proba",
    "query",
    "query_alfamix",
    "query_badge",
    "query_coreset",
    "query_powerbald",
    "query_probcover",
    "query_typiclust",
    "random_init",
    "run_al",
    "run_bench",
    "save_dataset",
    "score_bald",
    "score_entropy",
    "score_margin",
    "score_uncertainty",
    "select_topb",
    "train",
    "typicality",
    "win_fraction",
    "win_matrix",
    "zero_classifier",
]
