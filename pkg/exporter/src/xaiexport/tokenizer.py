"""Word and subword tokenization for the bundled classifier.

Words are lowercase alphabetic runs (plus the bracketed specials the
perturber inserts). Words the model knows are single pieces; unknown words
split into fixed-width character pieces, continuation pieces prefixed with
"##" so they can be re-merged. Piece ids for unknown chunks are hashed into
a bounded bucket range, which keeps the embedding table finite without a
trained piece vocabulary.
"""
from __future__ import annotations

import re
import zlib
from dataclasses import dataclass

PAD, MASK, UNK = "[pad]", "[mask]", "[unk]"
SPECIALS = (PAD, MASK, UNK)

_WORD_RE = re.compile(r"\[[a-z]+\]|[a-z']+")
_CHUNK = 4
_HASH_BUCKETS = 256


def words_of(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def stable_hash(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


@dataclass(frozen=True)
class Tokenizer:
    """Maps words to piece sequences and piece ids against a fixed lexicon."""

    lexicon: tuple[str, ...]  # known whole words, sorted

    @property
    def vocab_size(self) -> int:
        return len(SPECIALS) + len(self.lexicon) + _HASH_BUCKETS

    def piece_id(self, piece: str) -> int:
        if piece in SPECIALS:
            return SPECIALS.index(piece)
        base = piece[2:] if piece.startswith("##") else piece
        if not piece.startswith("##") and base in self._lexicon_index():
            return len(SPECIALS) + self._lexicon_index()[base]
        return len(SPECIALS) + len(self.lexicon) + stable_hash(piece) % _HASH_BUCKETS

    def _lexicon_index(self) -> dict[str, int]:
        cached = getattr(self, "_index_cache", None)
        if cached is None:
            cached = {w: i for i, w in enumerate(self.lexicon)}
            object.__setattr__(self, "_index_cache", cached)
        return cached

    def split_word(self, word: str) -> list[str]:
        if word in SPECIALS or word in self._lexicon_index():
            return [word]
        pieces = [word[:_CHUNK]]
        for start in range(_CHUNK, len(word), _CHUNK):
            pieces.append("##" + word[start : start + _CHUNK])
        return pieces

    def encode_words(self, words: list[str]) -> tuple[list[int], list[int]]:
        """Piece ids plus, per piece, the index of the word it came from."""
        ids: list[int] = []
        word_index: list[int] = []
        for w_i, word in enumerate(words):
            for piece in self.split_word(word):
                ids.append(self.piece_id(piece))
                word_index.append(w_i)
        return ids, word_index

    def encode(self, text: str) -> tuple[list[str], list[int], list[int]]:
        words = words_of(text)
        ids, word_index = self.encode_words(words)
        return words, ids, word_index


def merge_to_words(values, word_index: list[int], word_count: int) -> list[float]:
    """Sum piece-level values into word-level values; mass is conserved."""
    out = [0.0] * word_count
    for value, w_i in zip(values, word_index):
        out[w_i] += float(value)
    return out
