"""Command line for the exporter: produce evaluator-ready record files."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .attribution import METHODS
from .emit import DATASET_ID, ExportJob, export_explanations, export_perturbation_pairs, write_records


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xaiexport",
        description="Run attribution methods on the bundled classifier and emit record files.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("export", help="emit explanations, attention, and contrast pairs")
    p.add_argument("--model", default="tiny")
    p.add_argument("--seeds", nargs="+", default=["s1"])
    p.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    p.add_argument("--instances", type=int, default=50, help="dataset slice size (<= 200)")
    p.add_argument("--dataset-id", default=DATASET_ID)
    p.add_argument("--contrast", action="store_true", help="also emit class contrast pairs")
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("apply-plan", help="apply a perturbation plan and emit pairs")
    p.add_argument("--plan", required=True, help="perturbation_plan record file")
    p.add_argument("--model", default="tiny")
    p.add_argument("--seeds", nargs="+", default=["s1"])
    p.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    p.add_argument("--dataset-id", default=DATASET_ID)
    p.add_argument("--output-dir", required=True)

    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "instances", 1) > 200:
        print("refusing to export more than 200 instances (desk scale)", file=sys.stderr)
        return 2
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    job = ExportJob(
        model=args.model,
        seeds=tuple(args.seeds),
        methods=tuple(args.methods),
        instances=getattr(args, "instances", 1),
        contrast=getattr(args, "contrast", False),
        plan_path=getattr(args, "plan", None),
        dataset_id=args.dataset_id,
    )
    if args.subcommand == "export":
        result = export_explanations(job)
        write_records(out_dir / "explanations.jsonl", result.explanations)
        write_records(out_dir / "attention.jsonl", result.attention)
        if job.contrast:
            write_records(out_dir / "contrast_pairs.jsonl", result.contrast_pairs)
        written = {
            "explanations.jsonl": len(result.explanations),
            "attention.jsonl": len(result.attention),
        }
        if job.contrast:
            written["contrast_pairs.jsonl"] = len(result.contrast_pairs)
    else:
        result = export_perturbation_pairs(job)
        write_records(out_dir / "perturbation_pairs.jsonl", result.perturbation_pairs)
        written = {"perturbation_pairs.jsonl": len(result.perturbation_pairs)}
    for name, count in written.items():
        print(f"{out_dir / name}: {count} record(s)", file=sys.stderr)
    if result.failures:
        for failure in result.failures:
            print(f"skipped {failure['instance_id']}: {failure['reason']}", file=sys.stderr)
        # partial output plus a manifest of what was skipped
        write_records(out_dir / "failures.jsonl", result.failures)
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
