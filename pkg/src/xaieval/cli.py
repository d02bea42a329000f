"""Command-line interface wiring ingestion, metrics, aggregation, and verification.

Every run prints the tool version and a digest of the canonicalized
configuration to stderr, writes its single output to --output (or stdout),
and is byte-reproducible: identical argv plus identical input files yield
identical output for any --jobs value.

Exit codes: 0 success, 1 validation or data errors, 2 usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .consistency import DISTANCE_KINDS
from .contrast import DEFAULT_EPSILON
from .corpus import dump_jsonl, load_corpus
from .errors import CorpusValidationError, XaiEvalError
from .evaluate import (
    evaluate_consistency,
    evaluate_contrastivity,
    evaluate_ha,
    evaluate_robustness,
)
from .records import MetricReport
from .reference import (
    DEFAULT_TOLERANCE,
    load_reference_tables,
    render_discrepancy_report,
    verify_reference_tables,
)
from .robustness import (
    DEFAULT_FRACTION,
    DEFAULT_KIND,
    DEFAULT_TIER,
    make_perturbation_plan,
    plan_to_wire,
)
from .scoring import (
    REPORT_METRICS,
    WeightVector,
    emit_plot_data,
    fragment_from_wire,
    fragment_to_wire,
    merge_fragments,
    render_report,
    report_from_wire,
    report_to_wire,
)
from .util import config_digest


def _parse_weights(text: str) -> WeightVector:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            "weights must be four comma-separated numbers: ha,consistency,contrastivity,robustness"
        )
    try:
        w = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be numbers, got {text!r}") from None
    if any(x < 0 for x in w):
        raise argparse.ArgumentTypeError("weights must be >= 0")
    if abs(sum(w) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError("weights must sum to 1")
    return WeightVector(*w)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output", help="write the result here instead of stdout")
    parser.add_argument("--jobs", type=int, default=1, help="worker count (default 1)")
    parser.add_argument("--lenient", action="store_true", help="downgrade reference/mask problems to warnings")


def _add_filters(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", help="restrict to one dataset_id")
    parser.add_argument("--model", help="restrict to one model_id")
    parser.add_argument("--method", help="restrict to one method_id")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xaieval",
        description="Score feature-attribution explanations from serialized record files.",
    )
    parser.add_argument("--version", action="version", version=f"xaieval {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="parse record files and report validation issues")
    p.add_argument("paths", nargs="+", help="record files to validate")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--annotation-merge", choices=("majority", "union"), default="majority")
    p.add_argument("--output")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("ha", help="human-reasoning agreement (mean average precision)")
    p.add_argument("--explanations", nargs="+", required=True)
    p.add_argument("--annotations", nargs="+", required=True)
    p.add_argument("--top-n", type=int, help="override the per-instance rank cutoff")
    p.add_argument("--annotation-merge", choices=("majority", "union"), default="majority")
    _add_filters(p)
    _add_common(p)

    p = sub.add_parser("robustness", help="stability under perturbation (mean average difference)")
    p.add_argument("--pairs", nargs="+", required=True, help="perturbation pair files")
    _add_filters(p)
    _add_common(p)

    p = sub.add_parser("consistency", help="cross-seed attention/explanation rank correlation")
    p.add_argument("--explanations", nargs="+", required=True)
    p.add_argument("--attention", nargs="+", required=True)
    p.add_argument("--model", required=True, help="base model_id shared by both seed variants")
    p.add_argument("--seed-a", required=True)
    p.add_argument("--seed-b", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--distance", choices=DISTANCE_KINDS, default="cosine")
    p.add_argument("--dataset")
    _add_common(p)

    p = sub.add_parser("contrastivity", help="class-contrast KL divergence")
    p.add_argument("--pairs", nargs="+", required=True, help="class contrast pair files")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    _add_filters(p)
    _add_common(p)

    p = sub.add_parser("plan", help="emit perturbation plans for an exporter to apply")
    p.add_argument("--explanations", nargs="+", required=True)
    p.add_argument("--kind", choices=("mask", "delete", "synonym"), default=DEFAULT_KIND)
    p.add_argument("--fraction", type=float, default=DEFAULT_FRACTION)
    p.add_argument("--tier", choices=("high", "low"), default=DEFAULT_TIER)
    p.add_argument("--seed", type=int, default=0)
    _add_filters(p)
    _add_common(p)

    p = sub.add_parser("cws", help="merge metric fragments and compute combined scores")
    p.add_argument("--fragments", nargs="+", required=True)
    p.add_argument("--weights", type=_parse_weights, default=WeightVector())
    p.add_argument("--output")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("report", help="render metric tables or plot data")
    p.add_argument("--reports", nargs="+", required=True, help="metric report or fragment files")
    p.add_argument("--metric", choices=REPORT_METRICS, required=True)
    p.add_argument("--format", choices=("csv", "markdown", "plot-data"), default="csv")
    p.add_argument("--dataset", help="select one dataset when inputs span several")
    p.add_argument("--output")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("verify-paper", help="check the embedded scorecard's combined values")
    p.add_argument("--weights", type=_parse_weights, default=WeightVector())
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--strict", action="store_true", help="exit 1 unless the required cells match")
    p.add_argument("--output")
    p.add_argument("--jobs", type=int, default=1)

    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _announce(args: argparse.Namespace) -> str:
    # jobs and output do not affect computed values, so they stay out of the digest
    config = {
        k: v for k, v in vars(args).items() if k not in ("weights", "jobs", "output")
    }
    if getattr(args, "weights", None) is not None and hasattr(args.weights, "as_tuple"):
        config["weights"] = list(args.weights.as_tuple())
    digest = config_digest(config)
    print(f"xaieval {__version__} config={digest}", file=sys.stderr)
    return digest


def _load_or_fail(paths, lenient: bool, annotation_merge: str = "majority"):
    try:
        corpus, issues = load_corpus(paths, lenient=lenient, annotation_merge=annotation_merge)
    except CorpusValidationError as exc:
        for issue in exc.issues:
            print(issue.render(), file=sys.stderr)
        raise
    for issue in issues:
        print(issue.render(), file=sys.stderr)
    return corpus


def _provenance(args, digest: str) -> dict:
    return {"tool_version": __version__, "config_digest": digest}


def _cmd_validate(args) -> int:
    digest = _announce(args)
    del digest
    lines = []
    try:
        corpus, issues = load_corpus(
            args.paths, lenient=args.lenient, annotation_merge=args.annotation_merge
        )
    except CorpusValidationError as exc:
        lines = [issue.render() for issue in exc.issues]
        errors = sum(1 for i in exc.issues if i.severity == "error")
        warnings = len(exc.issues) - errors
        lines.append(f"invalid: {errors} error(s), {warnings} warning(s)")
        _emit("\n".join(lines) + "\n", args.output)
        return 1
    lines = [issue.render() for issue in issues]
    errors = sum(1 for i in issues if i.severity == "error")
    warnings = len(issues) - errors
    lines.append(
        f"ok: {corpus.size()} record(s), {errors} error(s), {warnings} warning(s)"
    )
    _emit("\n".join(lines) + "\n", args.output)
    return 1 if errors else 0


def _cmd_ha(args) -> int:
    digest = _announce(args)
    corpus = _load_or_fail(
        args.explanations + args.annotations, args.lenient, args.annotation_merge
    )
    fragments = evaluate_ha(
        corpus,
        top_n=args.top_n,
        jobs=args.jobs,
        dataset=args.dataset,
        model=args.model,
        method=args.method,
        **_provenance(args, digest),
    )
    _emit(dump_jsonl(fragment_to_wire(f) for f in fragments), args.output)
    return 0


def _cmd_robustness(args) -> int:
    digest = _announce(args)
    corpus = _load_or_fail(args.pairs, args.lenient)
    fragments = evaluate_robustness(
        corpus,
        jobs=args.jobs,
        dataset=args.dataset,
        model=args.model,
        method=args.method,
        **_provenance(args, digest),
    )
    _emit(dump_jsonl(fragment_to_wire(f) for f in fragments), args.output)
    return 0


def _cmd_consistency(args) -> int:
    digest = _announce(args)
    corpus = _load_or_fail(args.explanations + args.attention, args.lenient)
    fragments = evaluate_consistency(
        corpus,
        model=args.model,
        seed_a=args.seed_a,
        seed_b=args.seed_b,
        method=args.method,
        distance_kind=args.distance,
        dataset=args.dataset,
        **_provenance(args, digest),
    )
    _emit(dump_jsonl(fragment_to_wire(f) for f in fragments), args.output)
    return 0


def _cmd_contrastivity(args) -> int:
    digest = _announce(args)
    corpus = _load_or_fail(args.pairs, args.lenient)
    fragments = evaluate_contrastivity(
        corpus,
        epsilon=args.epsilon,
        jobs=args.jobs,
        dataset=args.dataset,
        model=args.model,
        method=args.method,
        **_provenance(args, digest),
    )
    _emit(dump_jsonl(fragment_to_wire(f) for f in fragments), args.output)
    return 0


def _cmd_plan(args) -> int:
    _announce(args)
    corpus = _load_or_fail(args.explanations, args.lenient)
    records = [
        corpus.explanations[key]
        for key in sorted(corpus.explanations)
        if (args.dataset is None or key[0] == args.dataset)
        and (args.model is None or key[2] == args.model)
        and (args.method is None or key[3] == args.method)
    ]
    combos = {(r.model_id, r.method_id) for r in records}
    if len(combos) > 1:
        print(
            "plan requires a single (model, method); narrow with --model/--method. "
            f"found: {sorted(combos)}",
            file=sys.stderr,
        )
        return 2
    plans = [
        make_perturbation_plan(r, args.kind, args.fraction, args.tier, args.seed)
        for r in records
    ]
    _emit(dump_jsonl(plan_to_wire(p) for p in plans), args.output)
    return 0


def _read_record_lines(paths) -> list[dict]:
    objs = []
    for path in paths:
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not raw.strip():
                continue
            try:
                objs.append(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise XaiEvalError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from None
    return objs


def _cmd_cws(args) -> int:
    digest = _announce(args)
    fragments = []
    for obj in _read_record_lines(args.fragments):
        if obj.get("record_type") != "metric_fragment":
            raise XaiEvalError(
                f"cws consumes metric_fragment records, got {obj.get('record_type')!r}"
            )
        fragments.append(fragment_from_wire(obj))
    reports = merge_fragments(
        fragments, args.weights, tool_version=__version__, config_digest=digest
    )
    _emit(dump_jsonl(report_to_wire(r) for r in reports), args.output)
    return 0


def _cmd_report(args) -> int:
    _announce(args)
    reports: list[MetricReport] = []
    for obj in _read_record_lines(args.reports):
        kind = obj.get("record_type")
        if kind == "metric_report":
            reports.append(report_from_wire(obj))
        elif kind == "metric_fragment":
            fragment = fragment_from_wire(obj)
            reports.append(
                MetricReport(
                    dataset_id=fragment.dataset_id,
                    model_id=fragment.model_id,
                    method_id=fragment.method_id,
                    **{fragment.metric: fragment.value},
                )
            )
        else:
            raise XaiEvalError(
                f"report consumes metric_report/metric_fragment records, got {kind!r}"
            )
    if args.dataset is not None:
        reports = [r for r in reports if r.dataset_id == args.dataset]
    if args.format == "plot-data":
        rows = emit_plot_data(reports, args.metric)
        _emit(dump_jsonl(rows), args.output)
        return 0
    _emit(render_report(reports, metric=args.metric, format=args.format), args.output)
    return 0


def _cmd_verify_paper(args) -> int:
    _announce(args)
    tables = load_reference_tables()
    report = verify_reference_tables(tables, weights=args.weights, tolerance=args.tolerance)
    _emit(render_discrepancy_report(report), args.output)
    if args.strict and not report.required_cells_ok():
        print("strict verification failed: a required cell does not match", file=sys.stderr)
        return 1
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "ha": _cmd_ha,
    "robustness": _cmd_robustness,
    "consistency": _cmd_consistency,
    "contrastivity": _cmd_contrastivity,
    "plan": _cmd_plan,
    "cws": _cmd_cws,
    "report": _cmd_report,
    "verify-paper": _cmd_verify_paper,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return _HANDLERS[args.subcommand](args)
    except CorpusValidationError:
        return 1
    except FileNotFoundError as exc:
        print(f"cannot read {exc.filename}", file=sys.stderr)
        return 1
    except XaiEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
