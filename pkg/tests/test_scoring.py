from __future__ import annotations

import logging

import numpy as np
import pytest

from xaieval.errors import EmptyInput, InconsistentGrid, WeightInvalid
from xaieval.records import MetricReport
from xaieval.scoring import (
    EQUAL_WEIGHTS,
    MetricFragment,
    WeightVector,
    combined_weighted_score,
    emit_plot_data,
    fragment_from_wire,
    fragment_to_wire,
    merge_fragments,
    parse_report_csv,
    render_cells,
    render_report,
    report_from_wire,
    report_to_wire,
)


class TestWeightVector:
    def test_default_is_equal(self):
        assert EQUAL_WEIGHTS.as_tuple() == (0.25, 0.25, 0.25, 0.25)

    def test_rejects_bad_sum(self):
        with pytest.raises(WeightInvalid):
            WeightVector(0.3, 0.3, 0.3, 0.2)

    def test_rejects_negative(self):
        with pytest.raises(WeightInvalid):
            WeightVector(1.2, -0.2, 0.0, 0.0)


class TestCombinedWeightedScore:
    def test_published_row_reproduces(self):
        # metric values for one model/method cell of the embedded scorecard
        score = combined_weighted_score(ha=0.8774, r=0.0056, cn=0.9665, ct=0.7065)
        assert score == pytest.approx(0.25 * (0.8774 + 0.9665 + 0.7065 + (1 - 0.0056)), abs=1e-15)
        assert score == pytest.approx(0.8862, abs=5e-4)

    def test_perfect_scores(self):
        assert combined_weighted_score(1.0, 0.0, 1.0, 1.0) == 1.0

    def test_projection_weights(self):
        assert combined_weighted_score(0.42, 0.9, 0.1, 0.3, WeightVector(1, 0, 0, 0)) == 0.42

    def test_linear_in_robustness(self):
        # central difference recovers -w_r at machine precision
        w = WeightVector(0.1, 0.2, 0.3, 0.4)
        h = 0.125
        up = combined_weighted_score(0.5, 0.5 + h, 0.5, 0.5, w)
        down = combined_weighted_score(0.5, 0.5 - h, 0.5, 0.5, w)
        assert (up - down) / (2 * h) == pytest.approx(-w.w_r, abs=1e-12)

    @pytest.mark.parametrize("arg", ["ha", "cn", "ct"])
    def test_linear_in_positive_metrics(self, arg):
        w = WeightVector(0.1, 0.2, 0.3, 0.4)
        h = 0.125
        base = dict(ha=0.5, r=0.5, cn=0.5, ct=0.5)
        up = dict(base, **{arg: 0.5 + h})
        down = dict(base, **{arg: 0.5 - h})
        slope = (
            combined_weighted_score(up["ha"], up["r"], up["cn"], up["ct"], w)
            - combined_weighted_score(down["ha"], down["r"], down["cn"], down["ct"], w)
        ) / (2 * h)
        expected = {"ha": w.w_ha, "cn": w.w_cn, "ct": w.w_ct}[arg]
        assert slope == pytest.approx(expected, abs=1e-12)

    def test_clamps_out_of_range_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING):
            high_r = combined_weighted_score(0.5, 1.7, 0.5, 0.5)
            negative_cn = combined_weighted_score(0.5, 0.0, -0.4, 0.5)
        assert high_r == combined_weighted_score(0.5, 1.0, 0.5, 0.5)
        assert negative_cn == combined_weighted_score(0.5, 0.0, 0.0, 0.5)
        assert sum("clamped" in r.message for r in caplog.records) == 2

    def test_bounded_for_bounded_inputs(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            raw = rng.random(4)
            w = rng.random(4) + 0.01
            weights = WeightVector(*(w / w.sum()))
            value = combined_weighted_score(raw[0], raw[1], raw[2], raw[3], weights)
            assert 0.0 <= value <= 1.0


def frag(metric, value, ds="d1", model="m1", method="x1", count=3):
    return MetricFragment(ds, model, method, metric, value, count)


class TestMergeFragments:
    def test_complete_cell_gets_cws(self):
        fragments = [
            frag("ha", 0.5), frag("robustness", 0.2),
            frag("consistency", 1.0), frag("contrastivity", 0.4),
        ]
        (report,) = merge_fragments(fragments)
        assert report.cws == pytest.approx(combined_weighted_score(0.5, 0.2, 1.0, 0.4))
        assert dict(report.instance_count_per_metric) == {
            "ha": 3, "robustness": 3, "consistency": 3, "contrastivity": 3,
        }

    def test_incomplete_cell_has_no_cws(self):
        (report,) = merge_fragments([frag("ha", 0.5), frag("robustness", 0.2)])
        assert report.cws is None
        assert report.ha == 0.5

    def test_conflicting_fragments_rejected(self):
        with pytest.raises(ValueError):
            merge_fragments([frag("ha", 0.5), frag("ha", 0.6)])

    def test_sorted_by_cell_key(self):
        fragments = [frag("ha", 0.5, model="z"), frag("ha", 0.6, model="a")]
        reports = merge_fragments(fragments)
        assert [r.model_id for r in reports] == ["a", "z"]

    def test_wire_round_trip(self):
        f = frag("ha", 0.5)
        assert fragment_from_wire(fragment_to_wire(f)) == f
        (report,) = merge_fragments(
            [frag("ha", 0.5), frag("robustness", 0.2),
             frag("consistency", 1.0), frag("contrastivity", 0.4)]
        )
        assert report_from_wire(report_to_wire(report)) == report


def report_row(method, model, cws, ds="d1"):
    return MetricReport(
        dataset_id=ds, model_id=model, method_id=method,
        ha=cws, robustness=cws, consistency=cws, contrastivity=cws, cws=cws,
    )


class TestRenderReport:
    def test_single_row_csv(self):
        text = render_report([report_row("lime", "tiny", 0.88619)], "cws", "csv")
        assert text == "method,model,value\nlime,tiny,0.8862\n"

    def test_shuffled_input_is_byte_identical(self):
        rows = [report_row(m, mod, 0.1 * i)
                for i, (m, mod) in enumerate(
                    (a, b) for a in ("m1", "m2", "m3") for b in ("a", "b"))]
        forward = render_report(rows, "cws", "csv")
        assert render_report(list(reversed(rows)), "cws", "csv") == forward

    def test_grid_shape_markdown(self):
        rows = [report_row(m, mod, 0.5) for m in ("x", "y") for mod in ("a", "b", "c")]
        text = render_report(rows, "cws", "markdown")
        lines = text.strip().splitlines()
        assert lines[0] == "| method | a | b | c |"
        assert len(lines) == 4  # header + rule + 2 method rows

    def test_full_five_by_five_grid(self):
        from xaieval.reference import load_reference_tables

        tables = load_reference_tables()
        rows = [
            report_row(method, model, tables.value("cws", "IMDB", method, model))
            for method in tables.methods
            for model in tables.models
        ]
        text = render_report(rows, "cws", "markdown",
                             method_order=list(tables.methods),
                             model_order=list(tables.models))
        lines = text.strip().splitlines()
        assert len(lines) == 2 + 5  # header + rule + 5 method rows
        assert all(line.count("|") == 7 for line in lines)  # 5 value columns
        csv_text = render_report(rows, "cws", "csv")
        assert len(csv_text.strip().splitlines()) == 1 + 25

    def test_markdown_missing_cell_is_dash(self):
        rows = [report_row("x", "a", 0.5), report_row("y", "b", 0.5)]
        text = render_report(rows, "cws", "markdown")
        assert "| x | 0.5000 | - |" in text

    def test_mixed_datasets_rejected(self):
        with pytest.raises(InconsistentGrid):
            render_report([report_row("x", "a", 0.5), report_row("x", "b", 0.5, ds="other")], "cws")

    def test_duplicate_cell_rejected(self):
        with pytest.raises(InconsistentGrid):
            render_report([report_row("x", "a", 0.5), report_row("x", "a", 0.6)], "cws")

    def test_csv_round_trip_is_exact(self):
        rows = [report_row(m, mod, v) for (m, mod, v) in
                (("lime", "tiny", 0.123449), ("lime", "base", 0.5), ("shap", "tiny", 1.0))]
        text = render_report(rows, "cws", "csv")
        assert render_cells(parse_report_csv(text), "csv") == text

    def test_display_order_override(self):
        rows = [report_row(m, "a", 0.5) for m in ("alpha", "lime", "shap")]
        text = render_report(rows, "cws", "csv", method_order=["shap", "lime"])
        body = text.splitlines()[1:]
        assert [ln.split(",")[0] for ln in body] == ["shap", "lime", "alpha"]

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            render_report([], "cws")
        with pytest.raises(EmptyInput):
            render_report([MetricReport("d1", "m", "x", ha=0.5)], "cws")


class TestPlotData:
    def test_cross_product_rows(self):
        rows = [report_row(m, mod, 0.5) for m in ("x", "y") for mod in ("a", "b")]
        data = emit_plot_data(rows, "cws")
        assert len(data) == 4
        assert [(d["method"], d["model"]) for d in data] == [
            ("x", "a"), ("x", "b"), ("y", "a"), ("y", "b")]

    def test_lower_is_better_flag(self):
        rows = [report_row("x", "a", 0.5)]
        assert emit_plot_data(rows, "robustness")[0]["lower_is_better"] is True
        assert emit_plot_data(rows, "cws")[0]["lower_is_better"] is False

    def test_shuffled_input_identical(self):
        rows = [report_row(m, mod, 0.3) for m in ("x", "y") for mod in ("a", "b")]
        assert emit_plot_data(list(reversed(rows)), "cws") == emit_plot_data(rows, "cws")

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            emit_plot_data([], "cws")
