"""Reference exporter producing evaluator-ready attribution record files."""
from __future__ import annotations

__version__ = "0.1.0"

from .attribution import METHODS, attribute
from .emit import (
    ExportJob,
    export_attention,
    export_explanations,
    export_perturbation_pairs,
    write_records,
)
from .model import CLASSES, TinyTextClassifier, load_dataset, load_model
from .perturb import apply_plan, load_synonyms
from .tokenizer import Tokenizer, merge_to_words, words_of

__all__ = [
    "CLASSES",
    "ExportJob",
    "METHODS",
    "TinyTextClassifier",
    "Tokenizer",
    "apply_plan",
    "attribute",
    "export_attention",
    "export_explanations",
    "export_perturbation_pairs",
    "load_dataset",
    "load_model",
    "load_synonyms",
    "merge_to_words",
    "words_of",
    "write_records",
]
