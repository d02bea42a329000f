from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from xaieval.records import ExplanationRecord, RationaleAnnotation


def make_expl(
    tokens,
    scores,
    instance_id="i001",
    dataset_id="ds",
    model_id="m",
    method_id="x",
    predicted_class="pos",
):
    return ExplanationRecord(
        schema_version=1,
        dataset_id=dataset_id,
        instance_id=instance_id,
        model_id=model_id,
        method_id=method_id,
        predicted_class=predicted_class,
        tokens=tuple(tokens),
        scores=tuple(float(s) for s in scores),
    )


def make_rationale(words, instance_id="i001", dataset_id="ds", annotator_id="a1"):
    return RationaleAnnotation(
        dataset_id=dataset_id,
        instance_id=instance_id,
        annotator_id=annotator_id,
        rationale_words=frozenset(words),
    )


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return Path(str(resources.files("xaieval").joinpath("data/fixtures")))


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return Path(__file__).parent / "golden"
