"""Rewrite a base tokenizer's output into a number-aware token stream."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from numlex.errors import BaseTokenizerError, OffsetMismatch
from numlex.numtok.base import Piece, check_tiling
from numlex.numtok.spans import NumberSpan, recognize_numbers


class Mode(str, enum.Enum):
    ADD_BACK = "addback"
    REPLACE = "replace"
    ADD_ON_EMBEDDING = "addembed"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        aliases = {"addback": cls.ADD_BACK, "replace": cls.REPLACE, "addembed": cls.ADD_ON_EMBEDDING,
                   "addonembedding": cls.ADD_ON_EMBEDDING}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown numtok mode {value!r}") from None


class Kind(str, enum.Enum):
    VOCAB = "vocab"
    NUM = "num"
    MASK = "mask"
    CLS = "cls"
    SEP = "sep"


@dataclass(frozen=True)
class Token:
    kind: Kind
    id: int | None = None
    start: int | None = None
    end: int | None = None
    # Num tokens: the recognized span. AddOnEmbedding vocab tokens: the span they overlap.
    number: NumberSpan | None = None

    def render(self, source: str) -> str:
        if self.kind is Kind.NUM:
            return f"<num {self.number.text}>"
        if self.kind is Kind.VOCAB:
            return source[self.start:self.end]
        return f"[{self.kind.value.upper()}]"


@dataclass
class TokenSequence:
    tokens: list[Token]
    mode: Mode
    numbers: list[NumberSpan] = field(default_factory=list)
    source: str = ""

    def __len__(self):
        return len(self.tokens)

    def vocab_pieces(self) -> list[Piece]:
        return [Piece(t.id, t.start, t.end) for t in self.tokens if t.kind is Kind.VOCAB]

    def render(self) -> list[str]:
        return [t.render(self.source) for t in self.tokens]


def _overlaps(a0, a1, b0, b1) -> bool:
    return a0 < b1 and b0 < a1


def _base_encode(base, text: str) -> list[Piece]:
    try:
        pieces = base.encode(text)
    except BaseTokenizerError:
        raise
    except Exception as exc:  # surface foreign tokenizer failures uniformly
        raise BaseTokenizerError(f"base tokenizer failed: {exc}") from exc
    check_tiling(text, pieces, getattr(base, "vocab_size", None))
    return pieces


def tokenize(source: str, base, mode=Mode.ADD_BACK) -> TokenSequence:
    mode = Mode.parse(mode)
    pieces = _base_encode(base, source)
    spans = recognize_numbers(source)

    if mode is Mode.ADD_BACK:
        tokens = _add_back(pieces, spans)
    elif mode is Mode.REPLACE:
        tokens = _replace(source, base, pieces, spans)
    else:
        tokens = _add_on_embedding(pieces, spans)
    return TokenSequence(tokens, mode, spans, source)


def _vocab(p: Piece, number=None) -> Token:
    return Token(Kind.VOCAB, p.id, p.start, p.end, number)


def _num(span: NumberSpan) -> Token:
    return Token(Kind.NUM, None, span.start, span.end, span)


def _add_back(pieces, spans):
    # each span is emitted right after the last piece that overlaps it
    last_cover = {}
    for si, s in enumerate(spans):
        for pi, p in enumerate(pieces):
            if _overlaps(p.start, p.end, s.start, s.end):
                last_cover[si] = pi
    if len(last_cover) != len(spans):
        raise OffsetMismatch("a recognized number is not covered by any base piece")
    after = {}
    for si, pi in last_cover.items():
        after.setdefault(pi, []).append(spans[si])
    tokens = []
    for pi, p in enumerate(pieces):
        tokens.append(_vocab(p))
        tokens.extend(_num(s) for s in after.get(pi, ()))
    return tokens


def _replace(source, base, pieces, spans):
    tokens = []
    for p in pieces:
        hit = [s for s in spans if _overlaps(p.start, p.end, s.start, s.end)]
        if not hit:
            tokens.append(_vocab(p))
            continue
        # keep the parts of a partially covered piece that lie outside every span
        pos = p.start
        for s in hit:
            if s.start > pos:
                tokens.extend(_reencode(source, base, pos, s.start))
            if not tokens or tokens[-1].number is not s or tokens[-1].kind is not Kind.NUM:
                tokens.append(_num(s))
            pos = max(pos, s.end)
        if pos < p.end:
            tokens.extend(_reencode(source, base, pos, p.end))
    return tokens


def _reencode(source, base, start, end):
    fragment = source[start:end]
    return [Token(Kind.VOCAB, q.id, q.start + start, q.end + start) for q in _base_encode(base, fragment)]


def _add_on_embedding(pieces, spans):
    tokens = []
    for p in pieces:
        hit = next((s for s in spans if _overlaps(p.start, p.end, s.start, s.end)), None)
        tokens.append(_vocab(p, hit))
    return tokens
