"""Corpus-level metric drivers: group records, score instances, emit fragments.

Each driver walks one corpus, groups work by (dataset, model, method), runs
the per-instance computation (optionally in parallel), and reduces in sorted
instance order. Degenerate inputs (all-zero score vectors, zero attention)
are skipped with a logged warning rather than failing the whole run; the
instance simply does not count toward that cell.
"""
from __future__ import annotations

import logging

from .agreement import average_precision, mean_average_precision
from .consistency import DISTANCE_KINDS, consistency
from .contrast import DEFAULT_EPSILON, contrastivity
from .corpus import CorpusIndex
from .errors import AllZeroScores, DegenerateSeries, InsufficientInstances
from .records import ExplanationRecord
from .robustness import average_difference, mean_average_difference
from .scoring import MetricFragment
from .util import parallel_map

logger = logging.getLogger(__name__)


def _keep(value: str, wanted: str | None) -> bool:
    return wanted is None or value == wanted


def evaluate_ha(
    corpus: CorpusIndex,
    top_n: int | None = None,
    jobs: int = 1,
    dataset: str | None = None,
    model: str | None = None,
    method: str | None = None,
    tool_version: str = "",
    config_digest: str = "",
) -> list[MetricFragment]:
    """Mean average precision per (dataset, model, method) cell.

    Instances without a merged annotation are skipped. When one instance has
    explanations for several predicted classes, the lexicographically
    smallest class is scored so runs are reproducible.
    """
    groups: dict[tuple[str, str, str], dict[str, ExplanationRecord]] = {}
    for (ds, instance, mod, meth, cls), record in corpus.explanations.items():
        if not (_keep(ds, dataset) and _keep(mod, model) and _keep(meth, method)):
            continue
        if (ds, instance) not in corpus.annotations:
            continue
        slot = groups.setdefault((ds, mod, meth), {})
        if instance not in slot or cls < slot[instance].predicted_class:
            slot[instance] = record

    fragments = []
    for key in sorted(groups):
        ds, mod, meth = key
        records = [groups[key][iid] for iid in sorted(groups[key])]

        def score(record: ExplanationRecord):
            rationale = corpus.annotations[(record.dataset_id, record.instance_id)]
            if all(s == 0.0 for s in record.scores):
                logger.warning(
                    "skipping all-zero explanation %s/%s", record.model_id, record.instance_id
                )
                return None
            n = min(top_n, record.token_count) if top_n is not None else None
            return average_precision(record, rationale, n)

        results = [r for r in parallel_map(score, records, jobs) if r is not None]
        if not results:
            continue
        fragments.append(
            MetricFragment(
                dataset_id=ds,
                model_id=mod,
                method_id=meth,
                metric="ha",
                value=mean_average_precision(results),
                instance_count=len(results),
                tool_version=tool_version,
                config_digest=config_digest,
            )
        )
    return fragments


def evaluate_robustness(
    corpus: CorpusIndex,
    jobs: int = 1,
    dataset: str | None = None,
    model: str | None = None,
    method: str | None = None,
    tool_version: str = "",
    config_digest: str = "",
) -> list[MetricFragment]:
    """Mean average difference over perturbation pairs per (dataset, model, method)."""
    groups: dict[tuple[str, str, str], list] = {}
    for pair in corpus.perturbation_pairs:
        rec = pair.original
        if not (
            _keep(rec.dataset_id, dataset)
            and _keep(rec.model_id, model)
            and _keep(rec.method_id, method)
        ):
            continue
        groups.setdefault((rec.dataset_id, rec.model_id, rec.method_id), []).append(pair)

    fragments = []
    for key in sorted(groups):
        ds, mod, meth = key

        def score(pair):
            try:
                return average_difference(pair)
            except AllZeroScores:
                logger.warning(
                    "skipping pair with all-zero scores: %s/%s",
                    pair.original.model_id,
                    pair.original.instance_id,
                )
                return None

        results = [r for r in parallel_map(score, groups[key], jobs) if r is not None]
        if not results:
            continue
        fragments.append(
            MetricFragment(
                dataset_id=ds,
                model_id=mod,
                method_id=meth,
                metric="robustness",
                value=mean_average_difference(results),
                instance_count=len(results),
                tool_version=tool_version,
                config_digest=config_digest,
            )
        )
    return fragments


def evaluate_contrastivity(
    corpus: CorpusIndex,
    epsilon: float = DEFAULT_EPSILON,
    jobs: int = 1,
    dataset: str | None = None,
    model: str | None = None,
    method: str | None = None,
    tool_version: str = "",
    config_digest: str = "",
) -> list[MetricFragment]:
    """Mean class-contrast KL divergence per (dataset, model, method)."""
    del jobs  # sorted mean dominates; per-pair KL is too cheap to farm out
    groups: dict[tuple[str, str, str], list] = {}
    for pair in corpus.contrast_pairs:
        if not (
            _keep(pair.dataset_id, dataset)
            and _keep(pair.model_id, model)
            and _keep(pair.method_id, method)
        ):
            continue
        groups.setdefault((pair.dataset_id, pair.model_id, pair.method_id), []).append(pair)

    fragments = []
    for key in sorted(groups):
        ds, mod, meth = key
        mean_kl, results = contrastivity(groups[key], epsilon)
        fragments.append(
            MetricFragment(
                dataset_id=ds,
                model_id=mod,
                method_id=meth,
                metric="contrastivity",
                value=mean_kl,
                instance_count=len(results),
                tool_version=tool_version,
                config_digest=config_digest,
            )
        )
    return fragments


def evaluate_consistency(
    corpus: CorpusIndex,
    model: str,
    seed_a: str,
    seed_b: str,
    method: str,
    distance_kind: str = "cosine",
    dataset: str | None = None,
    tool_version: str = "",
    config_digest: str = "",
) -> list[MetricFragment]:
    """Cross-seed consistency rho per dataset for one model/method.

    A degenerate distance series (constant ranks) means the correlation is
    undefined; that dataset's value is reported absent, with a warning. If no
    dataset has enough aligned instances at all, that is an input error and
    InsufficientInstances propagates.
    """
    if distance_kind not in DISTANCE_KINDS:
        raise ValueError(f"unknown distance kind: {distance_kind!r}")
    datasets = sorted(
        {
            key[0]
            for key in corpus.attention
            if key[2] == model and key[3] in (seed_a, seed_b) and _keep(key[0], dataset)
        }
    )
    fragments = []
    attempted = 0
    for ds in datasets:
        attempted += 1
        try:
            result = consistency(corpus, ds, model, seed_a, seed_b, method, distance_kind)
        except InsufficientInstances as exc:
            logger.warning("consistency on %s: %s", ds, exc)
            continue
        except DegenerateSeries as exc:
            logger.warning("consistency on %s undefined (%s); reported absent", ds, exc)
            continue
        fragments.append(
            MetricFragment(
                dataset_id=ds,
                model_id=model,
                method_id=method,
                metric="consistency",
                value=result.rho,
                instance_count=result.n_instances,
                tool_version=tool_version,
                config_digest=config_digest,
            )
        )
    if attempted == 0:
        raise InsufficientInstances(
            f"no attention summaries for model {model!r} seeds {seed_a!r}/{seed_b!r}"
        )
    return fragments
