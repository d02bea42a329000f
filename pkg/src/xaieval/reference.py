"""Embedded reference scorecard and its internal-consistency verification.

The package ships the published benchmark tables for four metrics plus the
combined score, over 5 methods x 5 models x 2 datasets. Verification
recomputes every combined-score cell from the four metric tables and diffs
it against the published combined value. A fixed set of cells is required
to verify (they are known to be internally consistent); the remaining cells
are reported with their actual verdicts, since several published rows do
not reproduce from the published inputs (all Integrated Gradients cells
among them). Per-cell data-quality flags mark transcription oddities.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import FixtureIncomplete
from .scoring import EQUAL_WEIGHTS, WeightVector, combined_weighted_score
from .util import format_float

DEFAULT_TOLERANCE = 5e-4

# Cells whose published combined score must reproduce from the published
# metric tables at equal weights within DEFAULT_TOLERANCE.
REQUIRED_MATCH_CELLS = (
    ("IMDB", "TinyBERT", "LIME"),
    ("IMDB", "TinyBERT", "SHAP"),
    ("IMDB", "TinyBERT", "LRP"),
    ("IMDB", "TinyBERT", "AMV"),
    ("IMDB", "XLM-R", "LIME"),
    ("TSE", "TinyBERT", "LIME"),
    ("TSE", "TinyBERT", "AMV"),
)

TABLE_METRICS = ("ha", "robustness", "consistency", "contrastivity", "cws")


@dataclass(frozen=True)
class ReferenceTables:
    datasets: tuple[str, ...]
    models: tuple[str, ...]
    methods: tuple[str, ...]
    tables: dict  # metric -> dataset -> method -> model -> float
    flags: tuple[dict, ...]

    def value(self, metric: str, dataset: str, method: str, model: str) -> float:
        return self.tables[metric][dataset][method][model]

    def validate_complete(self) -> None:
        for metric in TABLE_METRICS:
            if metric not in self.tables:
                raise FixtureIncomplete(f"missing table for metric {metric!r}")
            for dataset in self.datasets:
                for method in self.methods:
                    for model in self.models:
                        try:
                            value = self.tables[metric][dataset][method][model]
                        except KeyError:
                            raise FixtureIncomplete(
                                f"missing cell ({metric}, {dataset}, {method}, {model})"
                            ) from None
                        if not isinstance(value, float):
                            raise FixtureIncomplete(
                                f"non-numeric cell ({metric}, {dataset}, {method}, {model})"
                            )


def load_reference_tables() -> ReferenceTables:
    """Load and completeness-check the embedded scorecard."""
    raw = (
        resources.files("xaieval")
        .joinpath("data/reference_scores.json")
        .read_text(encoding="utf-8")
    )
    doc = json.loads(raw)
    tables = ReferenceTables(
        datasets=tuple(doc["datasets"]),
        models=tuple(doc["models"]),
        methods=tuple(doc["methods"]),
        tables={
            metric: {
                ds: {meth: {mod: float(v) for mod, v in by_model.items()}
                     for meth, by_model in by_method.items()}
                for ds, by_method in by_ds.items()
            }
            for metric, by_ds in doc["tables"].items()
        },
        flags=tuple(doc.get("flags", ())),
    )
    tables.validate_complete()
    return tables


@dataclass(frozen=True)
class CellCheck:
    dataset_id: str
    model_id: str
    method_id: str
    recomputed_cws: float
    published_cws: float
    abs_delta: float
    verdict: str  # "match" | "mismatch"


@dataclass(frozen=True)
class DiscrepancyReport:
    cells: tuple[CellCheck, ...]
    tolerance: float
    weights: WeightVector

    @property
    def matches(self) -> tuple[CellCheck, ...]:
        return tuple(c for c in self.cells if c.verdict == "match")

    @property
    def mismatches(self) -> tuple[CellCheck, ...]:
        return tuple(c for c in self.cells if c.verdict == "mismatch")

    def required_cells_ok(self) -> bool:
        by_key = {(c.dataset_id, c.model_id, c.method_id): c for c in self.cells}
        return all(by_key[key].verdict == "match" for key in REQUIRED_MATCH_CELLS)


def verify_reference_tables(
    tables: ReferenceTables,
    weights: WeightVector = EQUAL_WEIGHTS,
    tolerance: float = DEFAULT_TOLERANCE,
) -> DiscrepancyReport:
    """Recompute every combined-score cell from the metric tables and diff it."""
    tables.validate_complete()
    cells = []
    for dataset in tables.datasets:
        for method in tables.methods:
            for model in tables.models:
                recomputed = combined_weighted_score(
                    tables.value("ha", dataset, method, model),
                    tables.value("robustness", dataset, method, model),
                    tables.value("consistency", dataset, method, model),
                    tables.value("contrastivity", dataset, method, model),
                    weights,
                )
                published = tables.value("cws", dataset, method, model)
                delta = abs(recomputed - published)
                cells.append(
                    CellCheck(
                        dataset_id=dataset,
                        model_id=model,
                        method_id=method,
                        recomputed_cws=recomputed,
                        published_cws=published,
                        abs_delta=delta,
                        verdict="match" if delta <= tolerance else "mismatch",
                    )
                )
    return DiscrepancyReport(cells=tuple(cells), tolerance=tolerance, weights=weights)


def render_discrepancy_report(report: DiscrepancyReport) -> str:
    """Fixed-width text table, one line per cell, mismatches flagged with deltas."""
    lines = [
        f"combined-score verification at tolerance {report.tolerance:g}, "
        f"weights ({report.weights.w_ha:g}, {report.weights.w_cn:g}, "
        f"{report.weights.w_ct:g}, {report.weights.w_r:g})",
        f"{'dataset':8s} {'model':15s} {'method':21s} "
        f"{'recomputed':>10s} {'published':>9s} {'delta':>8s} verdict",
    ]
    for c in report.cells:
        lines.append(
            f"{c.dataset_id:8s} {c.model_id:15s} {c.method_id:21s} "
            f"{format_float(c.recomputed_cws):>10s} {format_float(c.published_cws):>9s} "
            f"{c.abs_delta:8.4f} {c.verdict}"
        )
    lines.append(
        f"{len(report.matches)} of {len(report.cells)} cells match; "
        f"required cells {'ok' if report.required_cells_ok() else 'FAILED'}"
    )
    return "\n".join(lines) + "\n"
