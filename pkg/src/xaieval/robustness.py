"""Explanation stability under input perturbation.

Scores of both records are L1-normalized, then every original word k gets an
element-wise difference d(k) between importance magnitudes: ||X[k]| - |X'[k']||
when the word survives into the perturbed text (matched one-to-one, left to
right), or plain |X[k]| when it does not. Magnitudes rather than signed values
keep d(k) in [0, 1] for signed attributions (a sign flip at equal importance
is not an importance change). The per-instance average difference is mean(d)
over the K original words, and the corpus-level mean average difference
averages that across instances. Lower is more stable.

This module also plans perturbations (which indices to mask, delete, or
replace) for exporters to apply; it never touches a model itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyInput, FractionOutOfRange, IndexOutOfRange
from .records import (
    ExplanationRecord,
    PerturbationPair,
    normalize_scores,
    normalize_word,
    rank_tokens,
)
from .util import sorted_mean

DEFAULT_FRACTION = 0.15
DEFAULT_TIER = "high"
DEFAULT_KIND = "mask"


@dataclass(frozen=True)
class PerturbationPlan:
    """Planned word edits for one instance: (original_index, kind, salience_tier)."""

    dataset_id: str
    instance_id: str
    actions: tuple[tuple[int, str, str], ...]
    rng_seed: int

    def __post_init__(self):
        if not self.actions:
            raise ValueError("a plan must contain at least one action")


@dataclass(frozen=True)
class RobustnessResult:
    instance_id: str
    ad: float
    per_word: tuple[tuple[int, int, float], ...]  # (index k, rel(k), d(k))


def make_perturbation_plan(
    record: ExplanationRecord,
    kind: str = DEFAULT_KIND,
    fraction: float = DEFAULT_FRACTION,
    tier: str = DEFAULT_TIER,
    seed: int = 0,
) -> PerturbationPlan:
    """Select ceil(fraction * K) indices from the top or bottom of the magnitude ranking.

    Selection is fully deterministic; the seed is carried in the plan for the
    exporter's use (synonym choice), not consumed here.
    """
    if not 0.0 < fraction <= 1.0:
        raise FractionOutOfRange(f"fraction={fraction} outside (0, 1]")
    if kind not in PerturbationPair.KINDS:
        raise ValueError(f"unknown perturbation kind: {kind!r}")
    if tier not in ("high", "low"):
        raise ValueError(f"salience tier must be 'high' or 'low', got {tier!r}")
    k = record.token_count
    count = math.ceil(fraction * k)
    ranking = rank_tokens(record, k)
    picked = ranking[:count] if tier == "high" else ranking[-count:]
    actions = tuple((entry.original_index, kind, tier) for entry in picked)
    return PerturbationPlan(
        dataset_id=record.dataset_id,
        instance_id=record.instance_id,
        actions=actions,
        rng_seed=seed,
    )


def match_positions(
    original_tokens: tuple[str, ...], perturbed_tokens: tuple[str, ...]
) -> list[int | None]:
    """One-to-one word matching by left-to-right consumption.

    Each original token takes the earliest unconsumed perturbed position
    holding the same normalized word; duplicates beyond the available
    occurrences stay unmatched. The bijection prevents double counting.
    """
    available: dict[str, list[int]] = {}
    for j, token in enumerate(perturbed_tokens):
        available.setdefault(normalize_word(token), []).append(j)
    cursor: dict[str, int] = {}
    matches: list[int | None] = []
    for token in original_tokens:
        word = normalize_word(token)
        positions = available.get(word, [])
        used = cursor.get(word, 0)
        if used < len(positions):
            matches.append(positions[used])
            cursor[word] = used + 1
        else:
            matches.append(None)
    return matches


def word_difference(pair: PerturbationPair, k: int) -> float:
    """d(k) for one word of an L1-normalized pair.

    Callers normalize scores first (average_difference does); this function
    assumes the pair is already comparable.
    """
    if not 0 <= k < pair.original.token_count:
        raise IndexOutOfRange(f"k={k} outside [0, {pair.original.token_count})")
    matched = match_positions(pair.original.tokens, pair.perturbed.tokens)[k]
    weight = abs(pair.original.scores[k])
    if matched is None:
        return weight
    return abs(weight - abs(pair.perturbed.scores[matched]))


def normalized_pair(pair: PerturbationPair) -> PerturbationPair:
    return PerturbationPair(
        original=normalize_scores(pair.original),
        perturbed=normalize_scores(pair.perturbed),
        perturbation_kind=pair.perturbation_kind,
        relevance_mask=pair.relevance_mask,
    )


def average_difference(pair: PerturbationPair) -> RobustnessResult:
    """Per-instance average of d(k) over all K original words."""
    norm = normalized_pair(pair)
    matches = match_positions(norm.original.tokens, norm.perturbed.tokens)
    per_word: list[tuple[int, int, float]] = []
    total = 0.0
    for k, matched in enumerate(matches):
        weight = abs(norm.original.scores[k])
        if matched is None:
            d = weight
            rel = 0
        else:
            d = abs(weight - abs(norm.perturbed.scores[matched]))
            rel = 1
        per_word.append((k, rel, d))
        total += d
    return RobustnessResult(
        instance_id=pair.original.instance_id,
        ad=total / len(matches),
        per_word=tuple(per_word),
    )


def mean_average_difference(results: list[RobustnessResult]) -> float:
    """Mean of per-instance average differences, accumulated in instance_id order."""
    if not results:
        raise EmptyInput("no robustness results to aggregate")
    return sorted_mean([r.ad for r in results], [r.instance_id for r in results])


def plan_to_wire(plan: PerturbationPlan) -> dict:
    return {
        "record_type": "perturbation_plan",
        "schema_version": 1,
        "dataset_id": plan.dataset_id,
        "instance_id": plan.instance_id,
        "actions": [
            {"original_index": i, "kind": kind, "salience_tier": tier}
            for i, kind, tier in plan.actions
        ],
        "rng_seed": plan.rng_seed,
    }


def plan_from_wire(obj: dict) -> PerturbationPlan:
    return PerturbationPlan(
        dataset_id=obj["dataset_id"],
        instance_id=obj["instance_id"],
        actions=tuple(
            (a["original_index"], a["kind"], a["salience_tier"]) for a in obj["actions"]
        ),
        rng_seed=obj["rng_seed"],
    )
