"""Quality metrics for feature-attribution explanations of text classifiers.

Four per-cell metrics (human-reasoning agreement, perturbation robustness,
cross-seed consistency, class contrastivity) plus a combined weighted score,
computed from serialized explanation records rather than live models.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .agreement import ApResult, average_precision, mean_average_precision
from .consistency import (
    ConsistencyResult,
    InstanceDistance,
    average_attention,
    consistency,
    spearman_rho,
    vector_distance,
)
from .contrast import ContrastResult, contrastivity, kl_divergence, to_distribution
from .corpus import (
    CorpusIndex,
    ValidationIssue,
    build_perturbation_pair,
    load_corpus,
    merge_annotations,
)
from .records import (
    AttentionSummary,
    ClassContrastPair,
    ExplanationRecord,
    MetricReport,
    PerturbationPair,
    RationaleAnnotation,
    normalize_scores,
    rank_tokens,
)
from .reference import (
    DiscrepancyReport,
    load_reference_tables,
    verify_reference_tables,
)
from .robustness import (
    PerturbationPlan,
    RobustnessResult,
    average_difference,
    make_perturbation_plan,
    mean_average_difference,
    word_difference,
)
from .scoring import (
    MetricFragment,
    WeightVector,
    combined_weighted_score,
    emit_plot_data,
    merge_fragments,
    render_report,
)

__all__ = [
    "ApResult",
    "AttentionSummary",
    "ClassContrastPair",
    "ConsistencyResult",
    "ContrastResult",
    "CorpusIndex",
    "DiscrepancyReport",
    "ExplanationRecord",
    "InstanceDistance",
    "MetricFragment",
    "MetricReport",
    "PerturbationPair",
    "PerturbationPlan",
    "RationaleAnnotation",
    "RobustnessResult",
    "ValidationIssue",
    "WeightVector",
    "average_attention",
    "average_difference",
    "average_precision",
    "build_perturbation_pair",
    "combined_weighted_score",
    "consistency",
    "contrastivity",
    "emit_plot_data",
    "kl_divergence",
    "load_corpus",
    "load_reference_tables",
    "make_perturbation_plan",
    "mean_average_difference",
    "mean_average_precision",
    "merge_annotations",
    "merge_fragments",
    "normalize_scores",
    "rank_tokens",
    "render_report",
    "spearman_rho",
    "to_distribution",
    "vector_distance",
    "verify_reference_tables",
    "word_difference",
]
