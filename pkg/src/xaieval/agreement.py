"""Human-reasoning agreement: ranked average precision against human rationales.

For one instance the method's tokens are ranked by saliency magnitude and
judged against the annotated rationale set: rel(k) is 1 when the rank-k word
is annotated, precision P(k) counts hits among the first k ranks, and the
average precision is sum(P(k) * rel(k)) / n over the n retrieved ranks. The
corpus-level value is the plain mean of per-instance average precisions.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInput, InstanceMismatch
from .records import ExplanationRecord, RationaleAnnotation, rank_tokens
from .util import sorted_mean


@dataclass(frozen=True)
class ApResult:
    instance_id: str
    n: int
    ap: float
    per_rank: tuple[tuple[int, float, int], ...]  # (rank k, P(k), rel(k))


def average_precision(
    explanation: ExplanationRecord,
    rationale: RationaleAnnotation,
    top_n: int | None = None,
) -> ApResult:
    """Average precision of the top-n ranked words against the rationale set.

    By default n is the rationale size capped at the token count, which keeps
    denominators comparable across instances; pass top_n to override. Words
    are matched as exact lowercased strings, and duplicate ranked words are
    each judged independently.
    """
    if (explanation.dataset_id, explanation.instance_id) != (
        rationale.dataset_id,
        rationale.instance_id,
    ):
        raise InstanceMismatch(
            f"explanation {explanation.instance_id!r} vs rationale {rationale.instance_id!r}"
        )
    if top_n is None:
        top_n = min(len(rationale.rationale_words), explanation.token_count)
    ranked = rank_tokens(explanation, top_n)
    per_rank: list[tuple[int, float, int]] = []
    hits = 0
    total = 0.0
    for k, entry in enumerate(ranked, start=1):
        rel = 1 if entry.token.lower() in rationale.rationale_words else 0
        hits += rel
        precision = hits / k
        per_rank.append((k, precision, rel))
        total += precision * rel
    return ApResult(
        instance_id=explanation.instance_id,
        n=top_n,
        ap=total / top_n,
        per_rank=tuple(per_rank),
    )


def mean_average_precision(results: list[ApResult]) -> float:
    """Mean of per-instance average precisions, accumulated in instance_id order."""
    if not results:
        raise EmptyInput("no average-precision results to aggregate")
    return sorted_mean([r.ap for r in results], [r.instance_id for r in results])
