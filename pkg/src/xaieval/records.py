"""Domain types for explanation evaluation, plus score normalization and ranking.

Everything here is immutable after construction so per-instance metric work
can run in parallel without locking. All reductions elsewhere in the package
consume instances in sorted instance_id order, which keeps floating-point
accumulation (and therefore every report) byte-reproducible.
"""
from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from typing import NamedTuple

from .errors import AllZeroScores, TopNOutOfRange

SCHEMA_VERSION = 1


def normalize_word(word: str) -> str:
    """Canonical word form used for all cross-record matching: NFC, trimmed, lowercased."""
    return unicodedata.normalize("NFC", word).strip().lower()


@dataclass(frozen=True)
class ExplanationRecord:
    """One instance's tokens and per-token saliency for a (dataset, model, method) triple.

    tokens and scores are index-aligned and always the same length K >= 1.
    Scores may be signed; magnitude carries the saliency.
    """

    schema_version: int
    dataset_id: str
    instance_id: str
    model_id: str
    method_id: str
    predicted_class: str
    tokens: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.scores):
            raise ValueError(
                f"tokens/scores length mismatch: {len(self.tokens)} vs {len(self.scores)}"
            )
        if len(self.tokens) < 1:
            raise ValueError("explanation must cover at least one token")

    @property
    def key(self) -> tuple[str, str, str, str, str]:
        return (
            self.dataset_id,
            self.instance_id,
            self.model_id,
            self.method_id,
            self.predicted_class,
        )

    @property
    def token_count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class RationaleAnnotation:
    """Human-marked salient words for one instance; words are stored normalized."""

    dataset_id: str
    instance_id: str
    annotator_id: str
    rationale_words: frozenset[str]

    def __post_init__(self):
        if not self.rationale_words:
            raise ValueError("rationale_words must be non-empty")
        for w in self.rationale_words:
            if w != normalize_word(w):
                raise ValueError(f"rationale word not normalized: {w!r}")


@dataclass(frozen=True)
class AttentionSummary:
    """Per-layer per-token attention vectors for one instance under one model seed.

    Exporters may pre-average across layers, in which case layers == 1 and a
    single vector is stored. All vectors share length T and are non-negative.
    """

    dataset_id: str
    instance_id: str
    model_id: str
    seed_id: str
    layers: int
    per_token_attention: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if len(self.per_token_attention) != self.layers:
            raise ValueError(
                f"expected {self.layers} layer vectors, got {len(self.per_token_attention)}"
            )
        widths = {len(v) for v in self.per_token_attention}
        if len(widths) != 1 or widths == {0}:
            raise ValueError("all layer vectors must share one length T >= 1")
        for vec in self.per_token_attention:
            for a in vec:
                if a < 0:
                    raise ValueError("attention values must be >= 0")

    @property
    def token_count(self) -> int:
        return len(self.per_token_attention[0])


@dataclass(frozen=True)
class PerturbationPair:
    """Original and perturbed explanations of one instance, with a word-presence mask.

    relevance_mask[k] is 1 iff original.tokens[k] (normalized) occurs anywhere
    in the perturbed token list. It is stored for auditing; evaluation always
    recomputes presence from the token lists themselves.
    """

    original: ExplanationRecord
    perturbed: ExplanationRecord
    perturbation_kind: str
    relevance_mask: tuple[int, ...]

    KINDS = ("mask", "delete", "synonym")

    def __post_init__(self):
        if self.perturbation_kind not in self.KINDS:
            raise ValueError(f"unknown perturbation kind: {self.perturbation_kind!r}")
        if len(self.relevance_mask) != self.original.token_count:
            raise ValueError("relevance_mask length must equal original token count")
        if any(m not in (0, 1) for m in self.relevance_mask):
            raise ValueError("relevance_mask entries must be 0 or 1")
        shared = ("dataset_id", "instance_id", "model_id", "method_id")
        for f_ in shared:
            if getattr(self.original, f_) != getattr(self.perturbed, f_):
                raise ValueError(f"original and perturbed disagree on {f_}")

    def recomputed_mask(self) -> tuple[int, ...]:
        present = {normalize_word(t) for t in self.perturbed.tokens}
        return tuple(
            1 if normalize_word(t) in present else 0 for t in self.original.tokens
        )


@dataclass(frozen=True)
class ClassContrastPair:
    """Explanations of the same instance for two different predicted classes."""

    dataset_id: str
    instance_id: str
    model_id: str
    method_id: str
    explanation_p: ExplanationRecord
    explanation_q: ExplanationRecord

    def __post_init__(self):
        if self.explanation_p.predicted_class == self.explanation_q.predicted_class:
            raise ValueError("contrast pair must explain two different classes")
        if self.explanation_p.tokens != self.explanation_q.tokens:
            raise ValueError("contrast pair explanations must share one token sequence")


@dataclass(frozen=True)
class MetricReport:
    """Metric values for one (dataset, model, method) cell, plus provenance.

    Any metric may be absent (None); the combined weighted score is present
    only when all four inputs are.
    """

    dataset_id: str
    model_id: str
    method_id: str
    ha: float | None = None
    robustness: float | None = None
    consistency: float | None = None
    contrastivity: float | None = None
    cws: float | None = None
    weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    instance_count_per_metric: tuple[tuple[str, int], ...] = ()
    tool_version: str = ""
    config_digest: str = ""

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be >= 0")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.cws is not None and None in (
            self.ha,
            self.robustness,
            self.consistency,
            self.contrastivity,
        ):
            raise ValueError("cws requires all four metric inputs")

    def value(self, metric: str) -> float | None:
        return {
            "ha": self.ha,
            "robustness": self.robustness,
            "consistency": self.consistency,
            "contrastivity": self.contrastivity,
            "cws": self.cws,
        }[metric]


class RankedToken(NamedTuple):
    token: str
    score: float
    original_index: int


def normalize_scores(record: ExplanationRecord) -> ExplanationRecord:
    """Return a copy of record with scores divided by the L1 norm.

    Signs are preserved, so sum(|score|) == 1 afterwards. Raises AllZeroScores
    when every score is exactly zero; callers decide whether that degenerate
    explanation is skipped or fatal.
    """
    total = math.fsum(abs(s) for s in record.scores)
    if total == 0.0:
        raise AllZeroScores(
            f"all scores are zero for instance {record.instance_id!r}"
        )
    scaled = tuple(s / total for s in record.scores)
    return ExplanationRecord(
        schema_version=record.schema_version,
        dataset_id=record.dataset_id,
        instance_id=record.instance_id,
        model_id=record.model_id,
        method_id=record.method_id,
        predicted_class=record.predicted_class,
        tokens=record.tokens,
        scores=scaled,
    )


def rank_tokens(record: ExplanationRecord, top_n: int) -> list[RankedToken]:
    """Top top_n tokens by |score| descending; ties broken by original position.

    Negative attributions count as salient, so ranking uses magnitude. The
    positional tie-break makes the order total and platform-independent.
    """
    k = record.token_count
    if top_n < 1 or top_n > k:
        raise TopNOutOfRange(f"top_n={top_n} outside [1, {k}]")
    order = sorted(range(k), key=lambda i: (-abs(record.scores[i]), i))
    return [
        RankedToken(record.tokens[i], record.scores[i], i) for i in order[:top_n]
    ]
