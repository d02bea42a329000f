"""Export jobs: run attribution over dataset slices and write record files.

The output is the evaluator's line-delimited JSON format (record_type
discriminator, schema_version 1); that file format is the only coupling
between the two packages. Explanations are emitted per (instance, seed
variant, method, class of interest), with piece scores merged into word
scores by summation and attention reduced to per-layer word mass.

Seed variants are keyed as "<model>@<seed>" in explanation records, while
attention records carry model and seed separately, matching what the
evaluator's consistency command expects.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .attribution import METHODS, attention_token_mass, attribute
from .model import CLASSES, TinyTextClassifier, load_dataset, load_model
from .perturb import apply_plan, load_synonyms
from .tokenizer import merge_to_words

SCHEMA_VERSION = 1
DATASET_ID = "mini-reviews"


@dataclass
class ExportJob:
    model: str = "tiny"
    seeds: tuple[str, ...] = ("s1",)
    methods: tuple[str, ...] = METHODS
    instances: int = 50
    contrast: bool = False
    plan_path: str | None = None
    dataset_id: str = DATASET_ID

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")


@dataclass
class ExportResult:
    explanations: list[dict] = field(default_factory=list)
    attention: list[dict] = field(default_factory=list)
    contrast_pairs: list[dict] = field(default_factory=list)
    perturbation_pairs: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)


def variant_id(model: str, seed: str, n_seeds: int) -> str:
    return model if n_seeds == 1 else f"{model}@{seed}"


def _explanation_obj(
    job: ExportJob, instance_id: str, model_id: str, method: str, cls: str,
    words: list[str], scores: list[float], with_type: bool = True,
) -> dict:
    obj = {"record_type": "explanation"} if with_type else {}
    obj.update(
        schema_version=SCHEMA_VERSION,
        dataset_id=job.dataset_id,
        instance_id=instance_id,
        model_id=model_id,
        method_id=method,
        predicted_class=cls,
        tokens=list(words),
        scores=[float(s) for s in scores],
    )
    return obj


def _word_scores(
    model: TinyTextClassifier, instance_id: str, text: str, method: str, cls: str
) -> tuple[list[str], list[float]]:
    words, ids, word_index = model.tokenizer.encode(text)
    piece_scores = attribute(model, ids, method, cls, instance_id)
    return words, merge_to_words(piece_scores, word_index, len(words))


def _attention_obj(job, instance_id, seed, words, word_index, output) -> dict:
    layer_mass = attention_token_mass(output)
    return {
        "record_type": "attention",
        "schema_version": SCHEMA_VERSION,
        "dataset_id": job.dataset_id,
        "instance_id": instance_id,
        "model_id": job.model,
        "seed_id": seed,
        "layers": int(layer_mass.shape[0]),
        "per_token_attention": [
            merge_to_words(layer, word_index, len(words)) for layer in layer_mass
        ],
    }


def export_attention(job: ExportJob) -> ExportResult:
    """Attention summaries alone: per instance and seed, one record holding
    the per-layer word-mass vectors (no attribution methods are run)."""
    result = ExportResult()
    rows = load_dataset()[: job.instances]
    models = {seed: load_model(job.model, seed) for seed in job.seeds}
    for row in rows:
        for seed in job.seeds:
            model = models[seed]
            words, ids, word_index = model.tokenizer.encode(row["text"])
            if not words:
                result.failures.append(
                    {"instance_id": row["instance_id"], "reason": "no tokens"}
                )
                continue
            result.attention.append(
                _attention_obj(
                    job, row["instance_id"], seed, words, word_index, model.forward(ids)
                )
            )
    return result


def export_explanations(job: ExportJob) -> ExportResult:
    """Explanations, attention summaries, and (optionally) contrast pairs."""
    result = ExportResult()
    rows = load_dataset()[: job.instances]
    models = {seed: load_model(job.model, seed) for seed in job.seeds}
    for row in rows:
        instance_id, text = row["instance_id"], row["text"]
        for seed in job.seeds:
            model = models[seed]
            words, ids, word_index = model.tokenizer.encode(text)
            if not words:
                result.failures.append(
                    {"instance_id": instance_id, "reason": "no tokens"}
                )
                continue
            model_id = variant_id(job.model, seed, len(job.seeds))
            output = model.forward(ids)
            predicted = CLASSES[int(output.probabilities.argmax())]
            contrast_cls = CLASSES[1 - CLASSES.index(predicted)]

            result.attention.append(
                _attention_obj(job, instance_id, seed, words, word_index, output)
            )

            for method in job.methods:
                _, scores = _word_scores(model, instance_id, text, method, predicted)
                result.explanations.append(
                    _explanation_obj(
                        job, instance_id, model_id, method, predicted, words, scores
                    )
                )
                if job.contrast:
                    _, q_scores = _word_scores(
                        model, instance_id, text, method, contrast_cls
                    )
                    result.contrast_pairs.append(
                        {
                            "record_type": "class_contrast_pair",
                            "schema_version": SCHEMA_VERSION,
                            "dataset_id": job.dataset_id,
                            "instance_id": instance_id,
                            "model_id": model_id,
                            "method_id": method,
                            "explanation_p": _explanation_obj(
                                job, instance_id, model_id, method, predicted,
                                words, scores, with_type=False,
                            ),
                            "explanation_q": _explanation_obj(
                                job, instance_id, model_id, method, contrast_cls,
                                words, q_scores, with_type=False,
                            ),
                        }
                    )
    return result


def _relevance_mask(original_words: list[str], perturbed_words: list[str]) -> list[int]:
    present = set(perturbed_words)
    return [1 if w in present else 0 for w in original_words]


def export_perturbation_pairs(job: ExportJob) -> ExportResult:
    """Apply a plan file and re-run attribution on the perturbed inputs."""
    if not job.plan_path:
        raise ValueError("plan_path is required to export perturbation pairs")
    plans = []
    for line in Path(job.plan_path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("record_type") != "perturbation_plan":
            raise ValueError(f"not a perturbation_plan record: {obj.get('record_type')!r}")
        plans.append(obj)
    synonyms = load_synonyms()
    result = ExportResult()
    rows = {row["instance_id"]: row for row in load_dataset()}
    models = {seed: load_model(job.model, seed) for seed in job.seeds}
    for plan in plans:
        instance_id = plan["instance_id"]
        row = rows.get(instance_id)
        if row is None:
            result.failures.append(
                {"instance_id": instance_id, "reason": "unknown instance"}
            )
            continue
        for seed in job.seeds:
            model = models[seed]
            model_id = variant_id(job.model, seed, len(job.seeds))
            words, ids, _ = model.tokenizer.encode(row["text"])
            perturbed_words = apply_plan(
                words, plan["actions"], plan["rng_seed"], synonyms
            )
            perturbed_text = " ".join(perturbed_words)
            kind = plan["actions"][0]["kind"]
            predicted = model.predict_class(ids)
            for method in job.methods:
                _, scores = _word_scores(model, instance_id, row["text"], method, predicted)
                p_words, p_scores = _word_scores(
                    model, instance_id, perturbed_text, method, predicted
                )
                result.perturbation_pairs.append(
                    {
                        "record_type": "perturbation_pair",
                        "schema_version": SCHEMA_VERSION,
                        "original": _explanation_obj(
                            job, instance_id, model_id, method, predicted,
                            words, scores, with_type=False,
                        ),
                        "perturbed": _explanation_obj(
                            job, instance_id, model_id, method, predicted,
                            p_words, p_scores, with_type=False,
                        ),
                        "perturbation_kind": kind,
                        "relevance_mask": _relevance_mask(words, p_words),
                    }
                )
    return result


def write_records(path: str | Path, objects: list[dict]) -> None:
    text = "".join(
        json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"
        for obj in objects
    )
    Path(path).write_text(text, encoding="utf-8", newline="\n")
