"""Application of perturbation plans to word sequences.

Plans originate from the evaluator's `plan` subcommand: per instance, a list
of (word index, kind, tier) actions plus an rng seed. Masking replaces the
word with [mask], deletion removes it, synonym replacement draws from the
bundled static synonym list (seeded choice, no network lexicon). Words
without a synonym entry fall back to masking so the plan always applies.
"""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .tokenizer import MASK, UNK, stable_hash


def load_synonyms() -> dict[str, list[str]]:
    raw = resources.files("xaiexport").joinpath("data/synonyms.json").read_text("utf-8")
    return json.loads(raw)


def apply_plan(
    words: list[str],
    actions: list[dict],
    rng_seed: int,
    synonyms: dict[str, list[str]] | None = None,
) -> list[str]:
    """Apply plan actions to a word list, returning the perturbed words."""
    synonyms = synonyms if synonyms is not None else load_synonyms()
    replacements: dict[int, str | None] = {}
    for action in actions:
        index = action["original_index"]
        if not 0 <= index < len(words):
            raise IndexError(f"plan action index {index} outside word list")
        kind = action["kind"]
        if kind == "delete":
            replacements[index] = None
        elif kind == "mask":
            replacements[index] = MASK
        elif kind == "synonym":
            options = synonyms.get(words[index])
            if not options:
                replacements[index] = MASK
            else:
                rng = np.random.default_rng(
                    stable_hash(f"{rng_seed}:{index}:{words[index]}")
                )
                replacements[index] = options[int(rng.integers(0, len(options)))]
        else:
            raise ValueError(f"unknown action kind {kind!r}")
    perturbed: list[str] = []
    for i, word in enumerate(words):
        if i in replacements:
            if replacements[i] is not None:
                perturbed.append(replacements[i])
        else:
            perturbed.append(word)
    return perturbed or [UNK]  # a record must keep at least one token
