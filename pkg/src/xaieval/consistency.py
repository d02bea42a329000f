"""Cross-seed consistency: do models that attend alike also explain alike?

Two same-architecture model variants trained from different seeds are
compared per instance: an attention distance between their layer-averaged
per-token attention vectors, and an explanation distance between their
saliency vectors for one method. Consistency is the Spearman rank
correlation between the two distance series across instances.

Seed-variant explanation records are keyed by convention as
"<model_id>@<seed_id>" in the corpus, since explanation keys carry no
separate seed field; attention records keep model_id and seed_id apart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex
from .errors import (
    AlignmentError,
    AllZeroScores,
    DegenerateSeries,
    InsufficientInstances,
    LengthMismatch,
    ZeroVector,
)
from .records import AttentionSummary, normalize_scores

DISTANCE_KINDS = ("cosine", "euclidean")


@dataclass(frozen=True)
class InstanceDistance:
    instance_id: str
    d_attention: float
    d_explanation: float


@dataclass(frozen=True)
class ConsistencyResult:
    dataset_id: str
    model_id: str
    model_pair: tuple[str, str]
    method_id: str
    rho: float
    n_instances: int
    per_instance: tuple[InstanceDistance, ...]


def seed_variant_model_id(model_id: str, seed_id: str) -> str:
    """Corpus model_id under which a seed variant's explanations are filed."""
    return f"{model_id}@{seed_id}"


def average_attention(summary: AttentionSummary) -> np.ndarray:
    """Element-wise mean over the layer vectors (identity when pre-averaged)."""
    layers = np.asarray(summary.per_token_attention, dtype=float)
    if (layers == layers[0]).all():
        return layers[0].copy()  # exact for identical layers
    return layers.mean(axis=0)


def vector_distance(u, v, kind: str = "cosine") -> float:
    """Cosine distance (1 - cosine similarity) or euclidean distance."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise LengthMismatch(f"vector lengths differ: {u.shape[0]} vs {v.shape[0]}")
    if kind == "euclidean":
        return float(np.linalg.norm(u - v))
    if kind == "cosine":
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        if nu == 0.0 or nv == 0.0:
            raise ZeroVector("cosine distance is undefined for an all-zero vector")
        if np.array_equal(u, v):
            return 0.0  # exact, so identical inputs produce a clean zero
        # rounding can push |cos| a hair past 1; keep the distance in [0, 2]
        return min(2.0, max(0.0, 1.0 - float(np.dot(u, v)) / (nu * nv)))
    raise ValueError(f"unknown distance kind: {kind!r}")


def rank_with_ties(values: list[float]) -> list[float]:
    """1-based ranks; tied values share the average of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j) / 2.0 + 1.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = average
        i = j + 1
    return ranks


def spearman_rho(xs: list[float], ys: list[float]) -> float:
    """Spearman correlation: Pearson correlation of average-tie ranks.

    Raises DegenerateSeries when either series is constant (all ranks tie),
    in which case the correlation is undefined and callers report the value
    as absent rather than inventing a number.
    """
    if len(xs) != len(ys):
        raise LengthMismatch(f"series lengths differ: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 3:
        raise InsufficientInstances(f"need at least 3 points, got {n}")
    rx = rank_with_ties(list(xs))
    ry = rank_with_ties(list(ys))
    mean_x = math.fsum(rx) / n
    mean_y = math.fsum(ry) / n
    dx = [r - mean_x for r in rx]
    dy = [r - mean_y for r in ry]
    var_x = math.fsum(d * d for d in dx)
    var_y = math.fsum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise DegenerateSeries("constant rank vector; correlation undefined")
    cov = math.fsum(a * b for a, b in zip(dx, dy))
    rho = cov / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, rho))


def consistency(
    corpus: CorpusIndex,
    dataset_id: str,
    model_id: str,
    seed_a: str,
    seed_b: str,
    method_id: str,
    distance_kind: str = "cosine",
) -> ConsistencyResult:
    """Correlate attention distances with explanation distances across a dataset.

    An instance participates when both seeds have an attention summary and an
    explanation for the method (any shared predicted class; the smallest is
    taken for determinism). Instances with degenerate vectors (all-zero) are
    skipped. Token counts must align between seeds within each signal.
    """
    if distance_kind not in DISTANCE_KINDS:
        raise ValueError(f"unknown distance kind: {distance_kind!r}")
    variant_a = seed_variant_model_id(model_id, seed_a)
    variant_b = seed_variant_model_id(model_id, seed_b)

    explanations_by_instance: dict[str, dict[str, dict[str, object]]] = {}
    for key, record in corpus.explanations.items():
        ds, instance, model, method, cls = key
        if ds == dataset_id and method == method_id and model in (variant_a, variant_b):
            explanations_by_instance.setdefault(instance, {}).setdefault(model, {})[
                cls
            ] = record

    candidates = []
    for instance, by_model in explanations_by_instance.items():
        if variant_a not in by_model or variant_b not in by_model:
            continue
        shared = sorted(set(by_model[variant_a]) & set(by_model[variant_b]))
        if not shared:
            continue
        att_a = corpus.attention.get((dataset_id, instance, model_id, seed_a))
        att_b = corpus.attention.get((dataset_id, instance, model_id, seed_b))
        if att_a is None or att_b is None:
            continue
        cls = shared[0]
        candidates.append(
            (instance, att_a, att_b, by_model[variant_a][cls], by_model[variant_b][cls])
        )

    distances: list[InstanceDistance] = []
    for instance, att_a, att_b, expl_a, expl_b in sorted(candidates):
        if att_a.token_count != att_b.token_count:
            raise AlignmentError(
                f"attention token counts differ for instance {instance!r}: "
                f"{att_a.token_count} vs {att_b.token_count}"
            )
        if expl_a.token_count != expl_b.token_count:
            raise AlignmentError(
                f"explanation token counts differ for instance {instance!r}: "
                f"{expl_a.token_count} vs {expl_b.token_count}"
            )
        try:
            d_att = vector_distance(
                average_attention(att_a), average_attention(att_b), distance_kind
            )
            d_expl = vector_distance(
                normalize_scores(expl_a).scores,
                normalize_scores(expl_b).scores,
                distance_kind,
            )
        except (ZeroVector, AllZeroScores):
            continue  # degenerate data point, excluded from the series
        distances.append(InstanceDistance(instance, d_att, d_expl))

    if len(distances) < 3:
        raise InsufficientInstances(
            f"only {len(distances)} usable instance(s) for "
            f"{model_id!r} seeds ({seed_a!r}, {seed_b!r}) method {method_id!r}"
        )
    rho = spearman_rho(
        [d.d_attention for d in distances], [d.d_explanation for d in distances]
    )
    return ConsistencyResult(
        dataset_id=dataset_id,
        model_id=model_id,
        model_pair=(seed_a, seed_b),
        method_id=method_id,
        rho=rho,
        n_instances=len(distances),
        per_instance=tuple(distances),
    )
