"""Toy subword tokenizers with character offsets.

Both tokenizers satisfy the same small interface: ``encode(text)`` returns
a list of :class:`Piece` (vocabulary id plus the ``[start, end)`` slice of
``text`` it covers). Whitespace is never covered by a piece.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

from numlex.errors import OffsetMismatch

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)

_PRETOKEN = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class Piece:
    id: int
    start: int
    end: int


class BaseTokenizer(Protocol):
    vocab: list[str]

    def encode(self, text: str) -> list[Piece]: ...


def check_tiling(text: str, pieces: list[Piece], vocab_size: int | None = None) -> None:
    """Raise OffsetMismatch unless ``pieces`` tile ``text`` (gaps may only be whitespace)."""
    pos = 0
    for p in pieces:
        if not (0 <= p.start < p.end <= len(text)):
            raise OffsetMismatch(f"piece {p} out of bounds for text of length {len(text)}")
        if p.start < pos:
            raise OffsetMismatch(f"piece {p} overlaps or precedes offset {pos}")
        if text[pos:p.start].strip():
            raise OffsetMismatch(f"non-whitespace gap {text[pos:p.start]!r} before {p}")
        if vocab_size is not None and not 0 <= p.id < vocab_size:
            raise OffsetMismatch(f"piece id {p.id} outside vocabulary of size {vocab_size}")
        pos = p.end
    if text[pos:].strip():
        raise OffsetMismatch(f"trailing text {text[pos:]!r} not covered")


class _VocabMixin:
    vocab: list[str]

    def _index(self):
        self.token_to_id = {t: i for i, t in enumerate(self.vocab)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def special_ids(self) -> dict[str, int]:
        return {t: self.token_to_id[t] for t in SPECIAL_TOKENS}

    @property
    def mask_id(self) -> int:
        return self.token_to_id[MASK]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP]

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    def decode_piece(self, text: str, piece: Piece) -> str:
        return text[piece.start:piece.end]


class WhitespaceTokenizer(_VocabMixin):
    """Words (``\\w+`` runs) and single punctuation characters."""

    kind = "ws"

    def __init__(self, vocab: list[str] | None = None):
        self.vocab = list(vocab) if vocab is not None else list(SPECIAL_TOKENS)
        if tuple(self.vocab[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens")
        self._index()

    @classmethod
    def fit(cls, texts: Iterable[str], max_size: int = 2000, min_freq: int = 1):
        counts = Counter(m.group() for t in texts for m in _PRETOKEN.finditer(t))
        ranked = sorted((w for w, c in counts.items() if c >= min_freq), key=lambda w: (-counts[w], w))
        return cls(list(SPECIAL_TOKENS) + ranked[: max(0, max_size - len(SPECIAL_TOKENS))])

    def encode(self, text: str) -> list[Piece]:
        unk = self.unk_id
        return [Piece(self.token_to_id.get(m.group(), unk), m.start(), m.end())
                for m in _PRETOKEN.finditer(text)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vocab": self.vocab}


class BPETokenizer(_VocabMixin):
    """Character-level byte-pair-style tokenizer.

    Merges never cross pre-token boundaries (words and punctuation), so
    offsets of merged pieces stay contiguous.
    """

    kind = "bpe"

    def __init__(self, alphabet: list[str], merges: list[tuple[str, str]]):
        self.alphabet = list(alphabet)
        self.merges = [tuple(m) for m in merges]
        self.ranks = {m: r for r, m in enumerate(self.merges)}
        self.vocab = list(SPECIAL_TOKENS) + self.alphabet + [a + b for a, b in self.merges]
        # a merged string can coincide with an alphabet symbol or earlier merge
        seen = {}
        for i, t in enumerate(self.vocab):
            seen.setdefault(t, i)
        self.token_to_id = seen
        self._cache: dict[str, list[str]] = {}

    @classmethod
    def fit(cls, texts: Iterable[str], num_merges: int = 300):
        words = Counter(m.group() for t in texts for m in _PRETOKEN.finditer(t))
        alphabet = sorted({c for w in words for c in w})
        seqs = {w: list(w) for w in words}
        merges = []
        for _ in range(num_merges):
            pairs = Counter()
            for w, seq in seqs.items():
                f = words[w]
                for a, b in zip(seq, seq[1:]):
                    pairs[(a, b)] += f
            if not pairs:
                break
            best = min(pairs, key=lambda p: (-pairs[p], p))
            if pairs[best] < 2:
                break
            merges.append(best)
            for w, seq in seqs.items():
                seqs[w] = _merge_once(seq, best)
        return cls(alphabet, merges)

    def _split_word(self, word: str) -> list[str]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        seq = list(word)
        while len(seq) > 1:
            ranked = [(self.ranks.get(p, None), p) for p in zip(seq, seq[1:])]
            ranked = [rp for rp in ranked if rp[0] is not None]
            if not ranked:
                break
            seq = _merge_once(seq, min(ranked)[1])
        self._cache[word] = seq
        return seq

    def encode(self, text: str) -> list[Piece]:
        unk = self.unk_id
        out = []
        for m in _PRETOKEN.finditer(text):
            pos = m.start()
            for sym in self._split_word(m.group()):
                out.append(Piece(self.token_to_id.get(sym, unk), pos, pos + len(sym)))
                pos += len(sym)
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alphabet": self.alphabet, "merges": [list(m) for m in self.merges]}


def _merge_once(seq: list[str], pair: tuple[str, str]) -> list[str]:
    out, i = [], 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
            out.append(seq[i] + seq[i + 1])
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def tokenizer_from_dict(d: dict):
    if d["kind"] == "ws":
        return WhitespaceTokenizer(d["vocab"])
    if d["kind"] == "bpe":
        return BPETokenizer(d["alphabet"], [tuple(m) for m in d["merges"]])
    raise ValueError(f"unknown tokenizer kind {d['kind']!r}")


def save_tokenizer(tok, path) -> None:
    Path(path).write_text(json.dumps(tok.to_dict(), sort_keys=True))


def load_tokenizer(path):
    return tokenizer_from_dict(json.loads(Path(path).read_text()))
