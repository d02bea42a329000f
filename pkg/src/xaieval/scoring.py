"""Combined weighted scoring, metric-report assembly, and report rendering.

The combined weighted score is a convex combination of the four metrics with
robustness inverted (lower robustness values are better, so it enters as
1 - r): cws = w_ha * ha + w_cn * cn + w_ct * ct + w_r * (1 - r). Inputs are
expected in [0, 1]; out-of-range values are clamped with a logged warning
(notably negative rank correlations, which clamp to 0, and KL divergences
above 1).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import EmptyInput, InconsistentGrid, WeightInvalid
from .records import MetricReport
from .util import format_float

logger = logging.getLogger(__name__)

METRICS = ("ha", "robustness", "consistency", "contrastivity")
REPORT_METRICS = METRICS + ("cws",)


@dataclass(frozen=True)
class WeightVector:
    """Non-negative weights for (ha, consistency, contrastivity, robustness); sum 1."""

    w_ha: float = 0.25
    w_cn: float = 0.25
    w_ct: float = 0.25
    w_r: float = 0.25

    def __post_init__(self):
        values = (self.w_ha, self.w_cn, self.w_ct, self.w_r)
        if any(w < 0 for w in values):
            raise WeightInvalid(f"weights must be >= 0, got {values}")
        if abs(sum(values) - 1.0) > 1e-9:
            raise WeightInvalid(f"weights must sum to 1, got {sum(values)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_ha, self.w_cn, self.w_ct, self.w_r)


EQUAL_WEIGHTS = WeightVector()


def _clamp01(value: float, name: str) -> float:
    if 0.0 <= value <= 1.0:
        return value
    clamped = min(1.0, max(0.0, value))
    logger.warning("%s=%r outside [0, 1]; clamped to %r for combined scoring", name, value, clamped)
    return clamped


def combined_weighted_score(
    ha: float, r: float, cn: float, ct: float, weights: WeightVector = EQUAL_WEIGHTS
) -> float:
    """Convex combination of the four metrics with robustness inverted."""
    ha = _clamp01(ha, "ha")
    r = _clamp01(r, "robustness")
    cn = _clamp01(cn, "consistency")
    ct = _clamp01(ct, "contrastivity")
    return (
        weights.w_ha * ha
        + weights.w_cn * cn
        + weights.w_ct * ct
        + weights.w_r * (1.0 - r)
    )


@dataclass(frozen=True)
class MetricFragment:
    """One metric value for one (dataset, model, method) cell, persisted between runs."""

    dataset_id: str
    model_id: str
    method_id: str
    metric: str
    value: float
    instance_count: int
    tool_version: str = ""
    config_digest: str = ""

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")


def fragment_to_wire(fragment: MetricFragment) -> dict:
    return {
        "record_type": "metric_fragment",
        "schema_version": 1,
        "dataset_id": fragment.dataset_id,
        "model_id": fragment.model_id,
        "method_id": fragment.method_id,
        "metric": fragment.metric,
        "value": fragment.value,
        "instance_count": fragment.instance_count,
        "tool_version": fragment.tool_version,
        "config_digest": fragment.config_digest,
    }


def fragment_from_wire(obj: dict) -> MetricFragment:
    return MetricFragment(
        dataset_id=obj["dataset_id"],
        model_id=obj["model_id"],
        method_id=obj["method_id"],
        metric=obj["metric"],
        value=float(obj["value"]),
        instance_count=int(obj["instance_count"]),
        tool_version=obj.get("tool_version", ""),
        config_digest=obj.get("config_digest", ""),
    )


def report_to_wire(report: MetricReport) -> dict:
    return {
        "record_type": "metric_report",
        "schema_version": 1,
        "dataset_id": report.dataset_id,
        "model_id": report.model_id,
        "method_id": report.method_id,
        "ha": report.ha,
        "robustness": report.robustness,
        "consistency": report.consistency,
        "contrastivity": report.contrastivity,
        "cws": report.cws,
        "weights": list(report.weights),
        "instance_count_per_metric": dict(report.instance_count_per_metric),
        "tool_version": report.tool_version,
        "config_digest": report.config_digest,
    }


def report_from_wire(obj: dict) -> MetricReport:
    return MetricReport(
        dataset_id=obj["dataset_id"],
        model_id=obj["model_id"],
        method_id=obj["method_id"],
        ha=obj.get("ha"),
        robustness=obj.get("robustness"),
        consistency=obj.get("consistency"),
        contrastivity=obj.get("contrastivity"),
        cws=obj.get("cws"),
        weights=tuple(obj.get("weights", (0.25, 0.25, 0.25, 0.25))),
        instance_count_per_metric=tuple(
            sorted(obj.get("instance_count_per_metric", {}).items())
        ),
        tool_version=obj.get("tool_version", ""),
        config_digest=obj.get("config_digest", ""),
    )


def merge_fragments(
    fragments: list[MetricFragment],
    weights: WeightVector = EQUAL_WEIGHTS,
    tool_version: str = "",
    config_digest: str = "",
) -> list[MetricReport]:
    """Fold metric fragments into per-cell reports, computing cws where complete.

    Fragments may come from runs executed at different times; two fragments
    for the same cell and metric are ambiguous and rejected.
    """
    cells: dict[tuple[str, str, str], dict[str, MetricFragment]] = {}
    for fragment in fragments:
        key = (fragment.dataset_id, fragment.model_id, fragment.method_id)
        slot = cells.setdefault(key, {})
        if fragment.metric in slot:
            raise ValueError(
                f"conflicting fragments for cell {key} metric {fragment.metric!r}"
            )
        slot[fragment.metric] = fragment
    reports = []
    for key in sorted(cells):
        dataset_id, model_id, method_id = key
        slot = cells[key]
        values = {m: slot[m].value if m in slot else None for m in METRICS}
        cws = None
        if all(values[m] is not None for m in METRICS):
            cws = combined_weighted_score(
                values["ha"],
                values["robustness"],
                values["consistency"],
                values["contrastivity"],
                weights,
            )
        reports.append(
            MetricReport(
                dataset_id=dataset_id,
                model_id=model_id,
                method_id=method_id,
                ha=values["ha"],
                robustness=values["robustness"],
                consistency=values["consistency"],
                contrastivity=values["contrastivity"],
                cws=cws,
                weights=weights.as_tuple(),
                instance_count_per_metric=tuple(
                    sorted((m, slot[m].instance_count) for m in slot)
                ),
                tool_version=tool_version,
                config_digest=config_digest,
            )
        )
    return reports


def _ordered(names: list[str], preferred: list[str] | None) -> list[str]:
    """Configured display order first, then anything else lexicographically."""
    if not preferred:
        return sorted(names)
    rank = {name: i for i, name in enumerate(preferred)}
    return sorted(names, key=lambda n: (rank.get(n, len(rank)), n))


def _grid(
    reports: list[MetricReport], metric: str
) -> tuple[str, list[str], list[str], dict[tuple[str, str], float]]:
    if not reports:
        raise EmptyInput("no reports to render")
    datasets = {r.dataset_id for r in reports}
    if len(datasets) != 1:
        raise InconsistentGrid(
            f"reports span multiple datasets: {', '.join(sorted(datasets))}"
        )
    if metric not in REPORT_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    cells: dict[tuple[str, str], float] = {}
    for report in reports:
        value = report.value(metric)
        if value is None:
            continue
        key = (report.method_id, report.model_id)
        if key in cells:
            raise InconsistentGrid(f"duplicate cell for method/model {key}")
        cells[key] = value
    if not cells:
        raise EmptyInput(f"no report carries a value for metric {metric!r}")
    methods = sorted({m for m, _ in cells})
    models = sorted({m for _, m in cells})
    return next(iter(datasets)), methods, models, cells


def render_cells(
    cells: dict[tuple[str, str], float],
    format: str = "csv",
    method_order: list[str] | None = None,
    model_order: list[str] | None = None,
) -> str:
    """Render (method, model) -> value cells as a deterministic table."""
    if not cells:
        raise EmptyInput("no cells to render")
    methods = _ordered(sorted({m for m, _ in cells}), method_order)
    models = _ordered(sorted({m for _, m in cells}), model_order)
    if format == "csv":
        lines = ["method,model,value"]
        for method in methods:
            for model in models:
                if (method, model) in cells:
                    lines.append(f"{method},{model},{format_float(cells[(method, model)])}")
        return "\n".join(lines) + "\n"
    if format == "markdown":
        header = "| method | " + " | ".join(models) + " |"
        rule = "| --- |" + " --- |" * len(models)
        lines = [header, rule]
        for method in methods:
            row = [
                format_float(cells[(method, model)]) if (method, model) in cells else "-"
                for model in models
            ]
            lines.append("| " + method + " | " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def render_report(
    reports: list[MetricReport],
    metric: str = "cws",
    format: str = "csv",
    method_order: list[str] | None = None,
    model_order: list[str] | None = None,
) -> str:
    """Deterministic table text: methods as rows, models as columns, 4 decimals."""
    _, _, _, cells = _grid(reports, metric)
    return render_cells(cells, format, method_order, model_order)


def parse_report_csv(text: str) -> dict[tuple[str, str], float]:
    """Parse render_report's own CSV back into cells (round-trip contract)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "method,model,value":
        raise ValueError("not a report CSV: bad header")
    cells: dict[tuple[str, str], float] = {}
    for ln in lines[1:]:
        method, model, value = ln.split(",")
        cells[(method, model)] = float(value)
    return cells


def emit_plot_data(reports: list[MetricReport], metric: str) -> list[dict]:
    """Grouped-bar plot data rows (method x model -> value), deterministic order."""
    if not reports:
        raise EmptyInput("no reports to plot")
    if metric not in REPORT_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    rows = []
    for report in sorted(
        reports, key=lambda r: (r.dataset_id, r.method_id, r.model_id)
    ):
        value = report.value(metric)
        if value is None:
            continue
        rows.append(
            {
                "record_type": "plot_datum",
                "schema_version": 1,
                "metric": metric,
                "dataset_id": report.dataset_id,
                "method": report.method_id,
                "model": report.model_id,
                "value": value,
                "lower_is_better": metric == "robustness",
            }
        )
    if not rows:
        raise EmptyInput(f"no report carries a value for metric {metric!r}")
    return rows
