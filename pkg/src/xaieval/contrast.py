"""Class-contrast divergence between feature-importance distributions.

Each explanation's scores are turned into a strictly positive probability
vector over its tokens (magnitudes, normalized, epsilon-floored), and the
divergence of the target-class distribution P from the contrast-class
distribution Q is the asymmetric KL divergence sum(P * ln(P / Q)) in nats.
Higher means the method explains the two classes with different features.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyInput, LengthMismatch, NotADistribution, TokenOrderMismatch
from .records import ClassContrastPair, ExplanationRecord
from .util import sorted_mean

DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True)
class ContrastResult:
    instance_id: str
    kl: float
    epsilon_used: float


def to_distribution(record: ExplanationRecord, epsilon: float = DEFAULT_EPSILON) -> list[float]:
    """Importance distribution over tokens, with an epsilon floor.

    Score magnitudes are normalized to unit mass, entries below epsilon are
    lifted to epsilon, and the vector is renormalized. The floor keeps every
    entry strictly positive (finite KL even for all-zero scores) while
    leaving any distribution whose smallest mass exceeds epsilon untouched,
    so results do not depend on the exact epsilon chosen. Exactly invariant
    under positive rescaling of the raw scores.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    mags = [abs(s) for s in record.scores]
    total = math.fsum(mags)
    if total > 0.0:
        mags = [m / total for m in mags]
    floored = [max(m, epsilon) for m in mags]
    z = math.fsum(floored)
    return [x / z for x in floored]


def kl_divergence(p: list[float], q: list[float]) -> float:
    """sum(p * ln(p/q)) in nats; >= 0, and 0 exactly when p == q."""
    if len(p) != len(q):
        raise LengthMismatch(f"distribution lengths differ: {len(p)} vs {len(q)}")
    for name, dist in (("p", p), ("q", q)):
        if any(x <= 0 for x in dist):
            raise NotADistribution(f"{name} must be strictly positive")
        if abs(math.fsum(dist) - 1.0) > 1e-9:
            raise NotADistribution(f"{name} must sum to 1 (got {math.fsum(dist)!r})")
    return math.fsum(pi * math.log(pi / qi) for pi, qi in zip(p, q))


def contrast_divergence(
    pair: ClassContrastPair, epsilon: float = DEFAULT_EPSILON
) -> ContrastResult:
    """KL(target-class distribution || contrast-class distribution) for one pair."""
    if pair.explanation_p.tokens != pair.explanation_q.tokens:
        raise TokenOrderMismatch(
            f"contrast pair token sequences differ for instance {pair.instance_id!r}"
        )
    p = to_distribution(pair.explanation_p, epsilon)
    q = to_distribution(pair.explanation_q, epsilon)
    return ContrastResult(instance_id=pair.instance_id, kl=kl_divergence(p, q), epsilon_used=epsilon)


def contrastivity(
    pairs: list[ClassContrastPair], epsilon: float = DEFAULT_EPSILON
) -> tuple[float, list[ContrastResult]]:
    """Per-pair KL divergences and their mean over instances in sorted order."""
    if not pairs:
        raise EmptyInput("no contrast pairs to evaluate")
    results = [contrast_divergence(pair, epsilon) for pair in pairs]
    mean_kl = sorted_mean([r.kl for r in results], [r.instance_id for r in results])
    return mean_kl, results
