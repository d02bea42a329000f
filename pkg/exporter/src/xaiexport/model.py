"""A miniature self-attention text classifier with deterministic shipped weights.

Checkpoints are not trained here (training is out of scope for the adapter):
parameters derive deterministically from the (model name, seed id) pair, with
an analytically injected sentiment direction so that lexicon words carry
class-relevant signal. Two seed ids give two same-architecture variants with
different weights, which is exactly what cross-seed consistency consumes.

Architecture, all numpy: piece embeddings + positions, two self-attention
layers (two heads, residual), a relu feed-forward block per layer (residual),
mean pooling, and a linear two-class head. No layer norm, which keeps the
relevance-propagation rules in attribution.py exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .tokenizer import SPECIALS, Tokenizer, stable_hash

CLASSES = ("negative", "positive")

D_MODEL = 16
N_LAYERS = 2
N_HEADS = 2
D_HEAD = D_MODEL // N_HEADS
D_FF = 32
MAX_LEN = 48

# words given an explicit sentiment component in the embedding table
POSITIVE_WORDS = frozenset(
    "great stellar superb clever funny warm brilliant best charming lovely "
    "wonderful uplifting sharp satisfying gorgeous loved gem delightful strong "
    "moving stunning perfect inspired smart bold tender fantastic honest "
    "gripping joyful powerful beautifully wit absorbing".split()
)
NEGATIVE_WORDS = frozenset(
    "terrible boring wooden lazy dull predictable bland flat regret mess "
    "shallow awful worst cheap incoherent forced fake tedious clumsy confusing "
    "crude pointless weak holes noisy ugly slow forgettable abrupt unearned "
    "hollow stiff miscast scary disappointing".split()
)


def load_dataset() -> list[dict]:
    raw = resources.files("xaiexport").joinpath("data/dataset.jsonl").read_text("utf-8")
    return [json.loads(line) for line in raw.splitlines() if line.strip()]


def dataset_lexicon(rows: list[dict]) -> tuple[str, ...]:
    words: set[str] = set()
    for row in rows:
        words.update(row["text"].lower().split())
    return tuple(sorted(words))


@dataclass
class ModelOutput:
    logits: np.ndarray          # (n_classes,)
    probabilities: np.ndarray   # (n_classes,)
    attentions: np.ndarray      # (layers, heads, T, T), rows sum to 1
    embeddings: np.ndarray      # (T, d) input embeddings actually used
    hidden: list[dict]          # per-layer intermediate tensors for relevance rules
    pooled: np.ndarray          # (d,)


class TinyTextClassifier:
    """Deterministic two-class classifier over piece ids."""

    def __init__(self, name: str, seed_id: str, tokenizer: Tokenizer):
        self.name = name
        self.seed_id = seed_id
        self.tokenizer = tokenizer
        rng = np.random.default_rng(stable_hash(f"{name}:{seed_id}"))
        scale = 0.35 / np.sqrt(D_MODEL)
        v = tokenizer.vocab_size
        self.embedding = rng.normal(0.0, scale, size=(v, D_MODEL))
        self.positional = rng.normal(0.0, scale * 0.5, size=(MAX_LEN, D_MODEL))
        self.layers = []
        for _ in range(N_LAYERS):
            self.layers.append(
                {
                    "q": rng.normal(0.0, scale, size=(N_HEADS, D_MODEL, D_HEAD)),
                    "k": rng.normal(0.0, scale, size=(N_HEADS, D_MODEL, D_HEAD)),
                    "v": rng.normal(0.0, scale, size=(N_HEADS, D_MODEL, D_HEAD)),
                    "o": rng.normal(0.0, scale, size=(D_MODEL, D_MODEL)),
                    "w1": rng.normal(0.0, scale, size=(D_MODEL, D_FF)),
                    "b1": np.zeros(D_FF),
                    "w2": rng.normal(0.0, scale, size=(D_FF, D_MODEL)),
                    "b2": np.zeros(D_MODEL),
                }
            )
        # sentiment direction: lexicon words get a signed component along a
        # fixed axis, and the head reads that axis out; seeds share the idea
        # but not the exact geometry
        direction = rng.normal(0.0, 1.0, size=D_MODEL)
        direction /= np.linalg.norm(direction)
        strength = 0.55 + 0.1 * rng.random()
        for i, word in enumerate(tokenizer.lexicon):
            idx = len(SPECIALS) + i
            if word in POSITIVE_WORDS:
                self.embedding[idx] += strength * direction
            elif word in NEGATIVE_WORDS:
                self.embedding[idx] -= strength * direction
        self.head_w = np.stack([-direction, direction], axis=1) * (
            1.0 + 0.2 * rng.random()
        )
        self.head_b = rng.normal(0.0, 0.01, size=2)
        self.pad_id = 0

    # -- forward -------------------------------------------------------------

    def embed(self, ids: list[int]) -> np.ndarray:
        if len(ids) > MAX_LEN:
            ids = ids[:MAX_LEN]
        return self.embedding[np.asarray(ids, dtype=int)] + self.positional[: len(ids)]

    def forward_embeddings(self, x: np.ndarray) -> ModelOutput:
        attentions = np.zeros((N_LAYERS, N_HEADS, x.shape[0], x.shape[0]))
        hidden = []
        embeddings = x
        for l_i, layer in enumerate(self.layers):
            heads = []
            values = []
            for h in range(N_HEADS):
                q = x @ layer["q"][h]
                k = x @ layer["k"][h]
                v = x @ layer["v"][h]
                scores = (q @ k.T) / np.sqrt(D_HEAD)
                scores -= scores.max(axis=1, keepdims=True)
                weights = np.exp(scores)
                weights /= weights.sum(axis=1, keepdims=True)
                attentions[l_i, h] = weights
                heads.append(weights @ v)
                values.append(v)
            concat = np.concatenate(heads, axis=1)
            z = concat @ layer["o"]
            x1 = x + z
            pre_act = x1 @ layer["w1"] + layer["b1"]
            act = np.maximum(pre_act, 0.0)
            f = act @ layer["w2"] + layer["b2"]
            x2 = x1 + f
            hidden.append(
                {"x": x, "values": values, "concat": concat, "z": z, "x1": x1,
                 "pre_act": pre_act, "act": act, "f": f, "x2": x2}
            )
            x = x2
        pooled = x.mean(axis=0)
        logits = pooled @ self.head_w + self.head_b
        exps = np.exp(logits - logits.max())
        return ModelOutput(
            logits=logits,
            probabilities=exps / exps.sum(),
            attentions=attentions,
            embeddings=embeddings,
            hidden=hidden,
            pooled=pooled,
        )

    def forward(self, ids: list[int]) -> ModelOutput:
        return self.forward_embeddings(self.embed(ids))

    def predict_class(self, ids: list[int]) -> str:
        return CLASSES[int(np.argmax(self.forward(ids).logits))]


def load_model(name: str, seed_id: str) -> TinyTextClassifier:
    """Construct the shipped checkpoint for a (model, seed) reference."""
    if not name or not seed_id:
        raise ValueError("model name and seed id must be non-empty")
    tokenizer = Tokenizer(lexicon=dataset_lexicon(load_dataset()))
    return TinyTextClassifier(name, seed_id, tokenizer)
