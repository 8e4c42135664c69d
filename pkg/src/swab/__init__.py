"""Language-only model-zoo ranking engine.

Predicts a performance ranking of a model zoo on a target classification
task from text-side assets alone, by transporting class-level statistics
(embedding-offset vectors and per-class rankings) from open-source datasets
through an optimal-transport bridge between the two class sets.
"""

from .core import (
    AssetBundle,
    AssetMissingError,
    ClassVocabulary,
    DenseMatrix,
    ModelAssets,
    ModelZoo,
    SolverError,
    SwabError,
    ValidationError,
    ValidationReport,
    l2_normalize,
    validate_bundle,
    zscore_normalize,
)
from .config import RunConfig
from .transport import (
    CostMatrix,
    SinkhornParams,
    TransportPlan,
    build_cost_matrix,
    filter_source_classes,
    solve_ot,
    solve_partial_ot,
    uniform_marginals,
)
from .gap import GapTable, apply_gap_to_texts, compute_class_gap_vectors, transfer_gap_vectors
from .scores import (
    FEATURE_NAMES,
    ScoreVector,
    assemble_score_vector,
    classification_scores,
    granularity_scores,
    inject_noise,
    zero_shot_classify,
)
from .capability import RankTable, aggregate_target_rank, class_rankings, transfer_rankings
from .ranker import LinearRanker, fit, predict, rank_from_predictions
from .bench import (
    BenchmarkReport,
    RankVector,
    borda_ensemble,
    kendall_tau_b,
    kendall_tau_top5,
    rank_models,
    run_lodo_benchmark,
    top5_recall,
)
from .synth import SynthConfig, SyntheticUniverse, generate_synthetic_universe

__version__ = "0.1.0"
