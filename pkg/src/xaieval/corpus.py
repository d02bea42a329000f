"""Parsing, validation, and indexing of line-delimited record files.

The wire format is one JSON object per line, UTF-8, discriminated by a
"record_type" field: explanation, annotation, attention, perturbation_pair,
or class_contrast_pair. Pair records may carry their explanations inline
(full objects) or reference indexed explanations by key via original_ref /
perturbed_ref / explanation_p_ref / explanation_q_ref.

Words (explanation tokens and rationale words) are NFC-normalized and
lowercased at ingest so matching across files is consistent. Input paths are
processed in sorted order, which makes indexes and issue lists independent
of the order paths were supplied in.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import CorpusValidationError, EmptyAfterMerge
from .records import (
    SCHEMA_VERSION,
    AttentionSummary,
    ClassContrastPair,
    ExplanationRecord,
    PerturbationPair,
    RationaleAnnotation,
    normalize_word,
)

RECORD_TYPES = (
    "explanation",
    "annotation",
    "attention",
    "perturbation_pair",
    "class_contrast_pair",
)

_EXPLANATION_FIELDS = {
    "record_type",
    "schema_version",
    "dataset_id",
    "instance_id",
    "model_id",
    "method_id",
    "predicted_class",
    "tokens",
    "scores",
}
_ANNOTATION_FIELDS = {
    "record_type",
    "schema_version",
    "dataset_id",
    "instance_id",
    "annotator_id",
    "rationale_words",
}
_ATTENTION_FIELDS = {
    "record_type",
    "schema_version",
    "dataset_id",
    "instance_id",
    "model_id",
    "seed_id",
    "layers",
    "per_token_attention",
}
_PERTURBATION_FIELDS = {
    "record_type",
    "schema_version",
    "original",
    "perturbed",
    "original_ref",
    "perturbed_ref",
    "perturbation_kind",
    "relevance_mask",
}
_CONTRAST_FIELDS = {
    "record_type",
    "schema_version",
    "dataset_id",
    "instance_id",
    "model_id",
    "method_id",
    "explanation_p",
    "explanation_q",
    "explanation_p_ref",
    "explanation_q_ref",
}


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "warning" | "error"
    file: str
    line: int
    code: str
    message: str

    @property
    def locator(self) -> tuple[str, int, str]:
        return (self.file, self.line, self.code)

    def render(self) -> str:
        return f"{self.file}:{self.line}: {self.severity}: {self.code}: {self.message}"


@dataclass
class CorpusIndex:
    """In-memory evaluation corpus keyed exactly as metrics consume it."""

    explanations: dict[tuple[str, str, str, str, str], ExplanationRecord] = field(
        default_factory=dict
    )
    annotations: dict[tuple[str, str], RationaleAnnotation] = field(default_factory=dict)
    attention: dict[tuple[str, str, str, str], AttentionSummary] = field(
        default_factory=dict
    )
    perturbation_pairs: list[PerturbationPair] = field(default_factory=list)
    contrast_pairs: list[ClassContrastPair] = field(default_factory=list)

    def size(self) -> int:
        return (
            len(self.explanations)
            + len(self.annotations)
            + len(self.attention)
            + len(self.perturbation_pairs)
            + len(self.contrast_pairs)
        )


def merge_annotations(annotations: Sequence[RationaleAnnotation]) -> RationaleAnnotation:
    """Majority-vote merge of one instance's annotations.

    A word survives iff it appears in strictly more than half of the
    annotators' sets. Raises EmptyAfterMerge when nothing reaches majority;
    callers may fall back to a union merge per configuration.
    """
    if not annotations:
        raise ValueError("nothing to merge")
    first = annotations[0]
    for ann in annotations[1:]:
        if (ann.dataset_id, ann.instance_id) != (first.dataset_id, first.instance_id):
            raise ValueError("annotations to merge must share (dataset_id, instance_id)")
    counts: dict[str, int] = {}
    for ann in annotations:
        for w in ann.rationale_words:
            counts[w] = counts.get(w, 0) + 1
    threshold = len(annotations) / 2.0
    merged = frozenset(w for w, c in counts.items() if c > threshold)
    if not merged:
        raise EmptyAfterMerge(
            f"no rationale word reaches majority for instance {first.instance_id!r}"
        )
    return RationaleAnnotation(
        dataset_id=first.dataset_id,
        instance_id=first.instance_id,
        annotator_id="merged",
        rationale_words=merged,
    )


def union_annotations(annotations: Sequence[RationaleAnnotation]) -> RationaleAnnotation:
    """Union merge, the configurable fallback for irreconcilable annotators."""
    if not annotations:
        raise ValueError("nothing to merge")
    words: set[str] = set()
    for ann in annotations:
        words |= ann.rationale_words
    return RationaleAnnotation(
        dataset_id=annotations[0].dataset_id,
        instance_id=annotations[0].instance_id,
        annotator_id="merged",
        rationale_words=frozenset(words),
    )


def build_perturbation_pair(
    original: ExplanationRecord, perturbed: ExplanationRecord, kind: str
) -> PerturbationPair:
    """Construct a pair with its relevance mask computed from the token lists."""
    present = {normalize_word(t) for t in perturbed.tokens}
    mask = tuple(1 if normalize_word(t) in present else 0 for t in original.tokens)
    return PerturbationPair(
        original=original, perturbed=perturbed, perturbation_kind=kind, relevance_mask=mask
    )


class _Loader:
    def __init__(self, lenient: bool, annotation_merge: str):
        self.lenient = lenient
        self.annotation_merge = annotation_merge
        self.issues: list[ValidationIssue] = []
        self.index = CorpusIndex()
        self._raw_annotations: dict[tuple[str, str], list[RationaleAnnotation]] = {}
        self._seen_annotators: set[tuple[str, str, str]] = set()
        self._pending_pairs: list[tuple[str, int, dict]] = []

    # -- issue helpers -------------------------------------------------

    def error(self, file: str, line: int, code: str, message: str) -> None:
        self.issues.append(ValidationIssue("error", file, line, code, message))

    def warning(self, file: str, line: int, code: str, message: str) -> None:
        self.issues.append(ValidationIssue("warning", file, line, code, message))

    def downgradable(self, file: str, line: int, code: str, message: str) -> None:
        # dangling_reference and mask_mismatch become warnings under --lenient
        severity = "warning" if self.lenient else "error"
        self.issues.append(ValidationIssue(severity, file, line, code, message))

    # -- field extraction ----------------------------------------------

    def _require(self, obj: dict, name: str, file: str, line: int) -> Any:
        if name not in obj:
            self.error(file, line, "missing_field", f"missing field {name!r}")
            return None
        return obj[name]

    def _string(self, obj: dict, name: str, file: str, line: int) -> str | None:
        value = self._require(obj, name, file, line)
        if value is None:
            return None
        if not isinstance(value, str) or not value:
            self.error(file, line, "invalid_field", f"{name} must be a non-empty string")
            return None
        return value

    def _check_schema_version(self, obj: dict, file: str, line: int) -> bool:
        if "schema_version" not in obj:
            self.warning(
                file, line, "missing_field", "missing schema_version, assuming 1"
            )
            return True
        version = obj["schema_version"]
        if version != SCHEMA_VERSION:
            self.error(
                file,
                line,
                "schema_version_unsupported",
                f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})",
            )
            return False
        return True

    def _check_unknown(self, obj: dict, known: set[str], file: str, line: int) -> None:
        extras = sorted(set(obj) - known)
        if extras:
            self.warning(
                file, line, "unknown_field", f"ignoring unknown field(s): {', '.join(extras)}"
            )

    def _float_list(self, value: Any, name: str, file: str, line: int) -> list[float] | None:
        if not isinstance(value, list):
            self.error(file, line, "invalid_field", f"{name} must be a list of numbers")
            return None
        out: list[float] = []
        for x in value:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                self.error(file, line, "invalid_field", f"{name} must contain only numbers")
                return None
            fx = float(x)
            if fx != fx or fx in (float("inf"), float("-inf")):
                self.error(file, line, "invalid_field", f"{name} contains a non-finite value")
                return None
            out.append(fx)
        return out

    # -- per-type parsers ------------------------------------------------

    def parse_explanation(self, obj: dict, file: str, line: int) -> ExplanationRecord | None:
        if not self._check_schema_version(obj, file, line):
            return None
        fields = {}
        for name in ("dataset_id", "instance_id", "model_id", "method_id", "predicted_class"):
            fields[name] = self._string(obj, name, file, line)
        tokens = self._require(obj, "tokens", file, line)
        scores_raw = self._require(obj, "scores", file, line)
        if None in fields.values() or tokens is None or scores_raw is None:
            return None
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            self.error(file, line, "invalid_field", "tokens must be a list of strings")
            return None
        scores = self._float_list(scores_raw, "scores", file, line)
        if scores is None:
            return None
        if len(tokens) != len(scores):
            self.error(
                file,
                line,
                "length_mismatch",
                f"tokens length {len(tokens)} != scores length {len(scores)}",
            )
            return None
        try:
            return ExplanationRecord(
                schema_version=SCHEMA_VERSION,
                dataset_id=fields["dataset_id"],
                instance_id=fields["instance_id"],
                model_id=fields["model_id"],
                method_id=fields["method_id"],
                predicted_class=fields["predicted_class"],
                tokens=tuple(normalize_word(t) for t in tokens),
                scores=tuple(scores),
            )
        except ValueError as exc:
            self.error(file, line, "invalid_field", str(exc))
            return None

    def parse_annotation(self, obj: dict, file: str, line: int) -> RationaleAnnotation | None:
        if not self._check_schema_version(obj, file, line):
            return None
        dataset_id = self._string(obj, "dataset_id", file, line)
        instance_id = self._string(obj, "instance_id", file, line)
        annotator_id = self._string(obj, "annotator_id", file, line)
        words = self._require(obj, "rationale_words", file, line)
        if None in (dataset_id, instance_id, annotator_id) or words is None:
            return None
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            self.error(file, line, "invalid_field", "rationale_words must be a list of strings")
            return None
        normalized = frozenset(normalize_word(w) for w in words if normalize_word(w))
        try:
            return RationaleAnnotation(
                dataset_id=dataset_id,
                instance_id=instance_id,
                annotator_id=annotator_id,
                rationale_words=normalized,
            )
        except ValueError as exc:
            self.error(file, line, "invalid_field", str(exc))
            return None

    def parse_attention(self, obj: dict, file: str, line: int) -> AttentionSummary | None:
        if not self._check_schema_version(obj, file, line):
            return None
        dataset_id = self._string(obj, "dataset_id", file, line)
        instance_id = self._string(obj, "instance_id", file, line)
        model_id = self._string(obj, "model_id", file, line)
        seed_id = self._string(obj, "seed_id", file, line)
        layers = self._require(obj, "layers", file, line)
        vectors = self._require(obj, "per_token_attention", file, line)
        if None in (dataset_id, instance_id, model_id, seed_id) or layers is None or vectors is None:
            return None
        if isinstance(layers, bool) or not isinstance(layers, int) or layers < 1:
            self.error(file, line, "invalid_field", "layers must be an integer >= 1")
            return None
        # A flat vector is accepted as the pre-averaged form (layers must be 1).
        if isinstance(vectors, list) and vectors and not isinstance(vectors[0], list):
            vectors = [vectors]
        if not isinstance(vectors, list):
            self.error(file, line, "invalid_field", "per_token_attention must be a list")
            return None
        parsed_layers: list[tuple[float, ...]] = []
        for vec in vectors:
            values = self._float_list(vec, "per_token_attention", file, line)
            if values is None:
                return None
            parsed_layers.append(tuple(values))
        try:
            return AttentionSummary(
                dataset_id=dataset_id,
                instance_id=instance_id,
                model_id=model_id,
                seed_id=seed_id,
                layers=layers,
                per_token_attention=tuple(parsed_layers),
            )
        except ValueError as exc:
            self.error(file, line, "invalid_field", str(exc))
            return None

    # -- pair resolution ---------------------------------------------------

    def _resolve_explanation(
        self, obj: dict, inline_key: str, ref_key: str, file: str, line: int
    ) -> ExplanationRecord | None:
        """Inline object wins; otherwise look the reference up in the index."""
        if inline_key in obj:
            inner = obj[inline_key]
            if not isinstance(inner, dict):
                self.error(file, line, "invalid_field", f"{inline_key} must be an object")
                return None
            return self.parse_explanation(inner, file, line)
        if ref_key in obj:
            ref = obj[ref_key]
            if not isinstance(ref, dict):
                self.error(file, line, "invalid_field", f"{ref_key} must be an object")
                return None
            try:
                key = (
                    ref["dataset_id"],
                    ref["instance_id"],
                    ref["model_id"],
                    ref["method_id"],
                    ref["predicted_class"],
                )
            except KeyError as exc:
                self.error(
                    file, line, "invalid_field", f"{ref_key} missing key field {exc.args[0]!r}"
                )
                return None
            record = self.index.explanations.get(key)
            if record is None:
                self.downgradable(
                    file,
                    line,
                    "dangling_reference",
                    f"{ref_key} does not resolve to a loaded explanation: {key}",
                )
                return None
            return record
        self.error(
            file, line, "missing_field", f"pair needs either {inline_key} or {ref_key}"
        )
        return None

    def resolve_perturbation_pair(self, obj: dict, file: str, line: int) -> None:
        if not self._check_schema_version(obj, file, line):
            return
        original = self._resolve_explanation(obj, "original", "original_ref", file, line)
        perturbed = self._resolve_explanation(obj, "perturbed", "perturbed_ref", file, line)
        kind = self._string(obj, "perturbation_kind", file, line)
        mask_raw = self._require(obj, "relevance_mask", file, line)
        if original is None or perturbed is None or kind is None or mask_raw is None:
            return
        if not isinstance(mask_raw, list) or any(
            isinstance(m, bool) or m not in (0, 1) for m in mask_raw
        ):
            self.error(file, line, "invalid_field", "relevance_mask must be a list of 0/1")
            return
        try:
            pair = PerturbationPair(
                original=original,
                perturbed=perturbed,
                perturbation_kind=kind,
                relevance_mask=tuple(mask_raw),
            )
        except ValueError as exc:
            self.error(file, line, "invalid_field", str(exc))
            return
        recomputed = pair.recomputed_mask()
        if recomputed != pair.relevance_mask:
            diff = [k for k, (a, b) in enumerate(zip(recomputed, pair.relevance_mask)) if a != b]
            self.downgradable(
                file,
                line,
                "mask_mismatch",
                f"stored relevance_mask disagrees with token lists at indices {diff}",
            )
            return
        self.index.perturbation_pairs.append(pair)

    def resolve_contrast_pair(self, obj: dict, file: str, line: int) -> None:
        if not self._check_schema_version(obj, file, line):
            return
        fields = {}
        for name in ("dataset_id", "instance_id", "model_id", "method_id"):
            fields[name] = self._string(obj, name, file, line)
        p = self._resolve_explanation(obj, "explanation_p", "explanation_p_ref", file, line)
        q = self._resolve_explanation(obj, "explanation_q", "explanation_q_ref", file, line)
        if None in fields.values() or p is None or q is None:
            return
        try:
            self.index.contrast_pairs.append(
                ClassContrastPair(
                    dataset_id=fields["dataset_id"],
                    instance_id=fields["instance_id"],
                    model_id=fields["model_id"],
                    method_id=fields["method_id"],
                    explanation_p=p,
                    explanation_q=q,
                )
            )
        except ValueError as exc:
            self.error(file, line, "invalid_field", str(exc))

    # -- file walk ---------------------------------------------------------

    def load_file(self, path: str) -> None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            self.error(path, 0, "unreadable_file", str(exc))
            return
        except UnicodeDecodeError as exc:
            self.error(path, 0, "parse_error", f"not valid UTF-8: {exc}")
            return
        for lineno, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                self.error(path, lineno, "parse_error", f"malformed JSON: {exc.msg}")
                continue
            if not isinstance(obj, dict):
                self.error(path, lineno, "parse_error", "line is not a JSON object")
                continue
            record_type = obj.get("record_type")
            if record_type == "explanation":
                self._check_unknown(obj, _EXPLANATION_FIELDS, path, lineno)
                record = self.parse_explanation(obj, path, lineno)
                if record is not None:
                    self._index_explanation(record, path, lineno)
            elif record_type == "annotation":
                self._check_unknown(obj, _ANNOTATION_FIELDS, path, lineno)
                record = self.parse_annotation(obj, path, lineno)
                if record is not None:
                    self._collect_annotation(record, path, lineno)
            elif record_type == "attention":
                self._check_unknown(obj, _ATTENTION_FIELDS, path, lineno)
                record = self.parse_attention(obj, path, lineno)
                if record is not None:
                    self._index_attention(record, path, lineno)
            elif record_type == "perturbation_pair":
                self._check_unknown(obj, _PERTURBATION_FIELDS, path, lineno)
                self._pending_pairs.append((path, lineno, obj))
            elif record_type == "class_contrast_pair":
                self._check_unknown(obj, _CONTRAST_FIELDS, path, lineno)
                self._pending_pairs.append((path, lineno, obj))
            else:
                self.error(
                    path,
                    lineno,
                    "unknown_record_type",
                    f"record_type {record_type!r} is not one of {', '.join(RECORD_TYPES)}",
                )

    def _index_explanation(self, record: ExplanationRecord, file: str, line: int) -> None:
        if record.key in self.index.explanations:
            self.error(file, line, "duplicate_key", f"duplicate explanation key {record.key}")
            return
        self.index.explanations[record.key] = record

    def _collect_annotation(self, record: RationaleAnnotation, file: str, line: int) -> None:
        seen_key = (record.dataset_id, record.instance_id, record.annotator_id)
        if seen_key in self._seen_annotators:
            self.error(
                file, line, "duplicate_key", f"duplicate annotation for annotator {seen_key}"
            )
            return
        self._seen_annotators.add(seen_key)
        self._raw_annotations.setdefault(
            (record.dataset_id, record.instance_id), []
        ).append(record)

    def _index_attention(self, record: AttentionSummary, file: str, line: int) -> None:
        key = (record.dataset_id, record.instance_id, record.model_id, record.seed_id)
        if key in self.index.attention:
            self.error(file, line, "duplicate_key", f"duplicate attention key {key}")
            return
        self.index.attention[key] = record

    def finish(self) -> None:
        for path, lineno, obj in self._pending_pairs:
            if obj.get("record_type") == "perturbation_pair":
                self.resolve_perturbation_pair(obj, path, lineno)
            else:
                self.resolve_contrast_pair(obj, path, lineno)
        for key in sorted(self._raw_annotations):
            group = self._raw_annotations[key]
            try:
                if self.annotation_merge == "union":
                    merged = union_annotations(group)
                else:
                    merged = merge_annotations(group)
            except EmptyAfterMerge as exc:
                severity = "warning" if self.lenient else "error"
                self.issues.append(
                    ValidationIssue(severity, "<merge>", 0, "empty_after_merge", str(exc))
                )
                continue
            self.index.annotations[key] = merged


def load_corpus(
    paths: Sequence[str | Path],
    lenient: bool = False,
    annotation_merge: str = "majority",
) -> tuple[CorpusIndex, list[ValidationIssue]]:
    """Parse record files into a CorpusIndex, collecting validation issues.

    Strict mode (default) raises CorpusValidationError when any error-severity
    issue is found. With lenient=True nothing aborts: dangling references and
    mask mismatches are downgraded to warnings, and offending records are
    dropped from the corpus.
    """
    if annotation_merge not in ("majority", "union"):
        raise ValueError(f"unknown annotation_merge policy: {annotation_merge!r}")
    loader = _Loader(lenient=lenient, annotation_merge=annotation_merge)
    for path in sorted(dict.fromkeys(str(p) for p in paths)):
        loader.load_file(path)
    loader.finish()
    issues = sorted(loader.issues, key=lambda i: i.locator)
    if not lenient and any(i.severity == "error" for i in issues):
        raise CorpusValidationError(issues)
    return loader.index, issues


# -- serialization -----------------------------------------------------------


def explanation_to_wire(record: ExplanationRecord, with_type: bool = True) -> dict:
    obj: dict[str, Any] = {}
    if with_type:
        obj["record_type"] = "explanation"
    obj.update(
        schema_version=record.schema_version,
        dataset_id=record.dataset_id,
        instance_id=record.instance_id,
        model_id=record.model_id,
        method_id=record.method_id,
        predicted_class=record.predicted_class,
        tokens=list(record.tokens),
        scores=list(record.scores),
    )
    return obj


def annotation_to_wire(record: RationaleAnnotation) -> dict:
    return {
        "record_type": "annotation",
        "schema_version": SCHEMA_VERSION,
        "dataset_id": record.dataset_id,
        "instance_id": record.instance_id,
        "annotator_id": record.annotator_id,
        "rationale_words": sorted(record.rationale_words),
    }


def attention_to_wire(record: AttentionSummary) -> dict:
    return {
        "record_type": "attention",
        "schema_version": SCHEMA_VERSION,
        "dataset_id": record.dataset_id,
        "instance_id": record.instance_id,
        "model_id": record.model_id,
        "seed_id": record.seed_id,
        "layers": record.layers,
        "per_token_attention": [list(v) for v in record.per_token_attention],
    }


def perturbation_pair_to_wire(pair: PerturbationPair) -> dict:
    return {
        "record_type": "perturbation_pair",
        "schema_version": SCHEMA_VERSION,
        "original": explanation_to_wire(pair.original, with_type=False),
        "perturbed": explanation_to_wire(pair.perturbed, with_type=False),
        "perturbation_kind": pair.perturbation_kind,
        "relevance_mask": list(pair.relevance_mask),
    }


def contrast_pair_to_wire(pair: ClassContrastPair) -> dict:
    return {
        "record_type": "class_contrast_pair",
        "schema_version": SCHEMA_VERSION,
        "dataset_id": pair.dataset_id,
        "instance_id": pair.instance_id,
        "model_id": pair.model_id,
        "method_id": pair.method_id,
        "explanation_p": explanation_to_wire(pair.explanation_p, with_type=False),
        "explanation_q": explanation_to_wire(pair.explanation_q, with_type=False),
    }


def corpus_to_wire(index: CorpusIndex) -> list[dict]:
    """Serialize a corpus in deterministic order; re-loading yields an equal corpus."""
    out: list[dict] = []
    for key in sorted(index.explanations):
        out.append(explanation_to_wire(index.explanations[key]))
    for key in sorted(index.annotations):
        out.append(annotation_to_wire(index.annotations[key]))
    for key in sorted(index.attention):
        out.append(attention_to_wire(index.attention[key]))
    for pair in index.perturbation_pairs:
        out.append(perturbation_pair_to_wire(pair))
    for pair in index.contrast_pairs:
        out.append(contrast_pair_to_wire(pair))
    return out


def dump_jsonl(objs: Iterable[dict]) -> str:
    """Compact, key-sorted JSONL text with LF endings; byte-stable per content."""
    lines = [
        json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        for obj in objs
    ]
    return "".join(line + "\n" for line in lines)


def write_jsonl(path: str | Path, objs: Iterable[dict]) -> None:
    Path(path).write_text(dump_jsonl(objs), encoding="utf-8", newline="\n")
