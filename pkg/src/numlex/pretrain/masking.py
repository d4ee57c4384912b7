"""Masking plans for the number-aware masked-recovery objective.

Every maskable position (vocabulary and number tokens; never CLS/SEP) is
selected with probability ``mask_rate``. A selected position is replaced by
[MASK] 80% of the time; half of the remainder get a random vocabulary
token and the other half keep their original input. Number positions
carry a regression target, vocabulary positions a token-id target.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from numlex.errors import ConfigError, EmptySequence, PlanMismatch
from numlex.numeric import DEFAULT_EPS, RegressionTarget, parse_value, regression_target
from numlex.numtok.base import SPECIAL_TOKENS
from numlex.numtok.rewrite import Kind, Token, TokenSequence

MASKABLE = (Kind.VOCAB, Kind.NUM)


class Action(str, enum.Enum):
    MASK = "mask"
    RANDOM = "random"
    KEEP = "keep"


@dataclass(frozen=True)
class VocabTarget:
    token_id: int


@dataclass(frozen=True)
class NumTarget:
    target: RegressionTarget
    text: str


@dataclass(frozen=True)
class MaskEntry:
    index: int
    action: Action
    target: VocabTarget | NumTarget
    random_id: int | None = None

    @property
    def is_num(self) -> bool:
        return isinstance(self.target, NumTarget)


@dataclass
class MaskingPlan:
    entries: list[MaskEntry] = field(default_factory=list)
    length: int = 0

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def num_entries(self) -> list[MaskEntry]:
        return [e for e in self.entries if e.is_num]

    @property
    def vocab_entries(self) -> list[MaskEntry]:
        return [e for e in self.entries if not e.is_num]

    def counts(self) -> dict[str, int]:
        out = {a.value: 0 for a in Action}
        for e in self.entries:
            out[e.action.value] += 1
        return out


def frame(seq: TokenSequence, cls_id: int, sep_id: int, max_len: int | None = None) -> TokenSequence:
    """Wrap a sequence as [CLS] tokens [SEP], truncating the body to fit ``max_len``."""
    body = seq.tokens
    if max_len is not None:
        if max_len < 3:
            raise ConfigError("max_len must leave room for [CLS], one token and [SEP]")
        body = body[:max_len - 2]
    tokens = [Token(Kind.CLS, cls_id)] + list(body) + [Token(Kind.SEP, sep_id)]
    return TokenSequence(tokens, seq.mode, seq.numbers, seq.source)


def _target(tok: Token, eps: float) -> VocabTarget | NumTarget:
    # a vocab token tagged with a number (AddOnEmbedding) is supervised by regression
    if tok.number is not None:
        return NumTarget(regression_target(parse_value(tok.number), eps), tok.number.text)
    return VocabTarget(tok.id)


def build_masking_plan(seq: TokenSequence, rng, mask_rate: float = 0.15, vocab_size: int | None = None,
                       eps: float = DEFAULT_EPS) -> MaskingPlan:
    """Seeded per-position mask decisions for one sequence."""
    if not len(seq):
        raise EmptySequence("cannot mask an empty token sequence")
    if not 0.0 <= mask_rate <= 1.0:
        raise ConfigError(f"mask_rate must lie in [0, 1], got {mask_rate}")
    n_special = len(SPECIAL_TOKENS)
    if vocab_size is not None and vocab_size <= n_special:
        raise ConfigError("vocabulary has no non-special tokens to draw random replacements from")
    entries = []
    # draws are taken for every position so a plan depends only on (rng, length)
    draws = rng.random((len(seq), 3))
    randoms = rng.integers(n_special, max(vocab_size or 0, n_special + 1), size=len(seq))
    for i, tok in enumerate(seq.tokens):
        if tok.kind not in MASKABLE or draws[i, 0] >= mask_rate:
            continue
        if draws[i, 1] < 0.8:
            action, rid = Action.MASK, None
        elif draws[i, 2] < 0.5:
            if vocab_size is None:
                raise ConfigError("vocab_size is needed to draw random replacement tokens")
            action, rid = Action.RANDOM, int(randoms[i])
        else:
            action, rid = Action.KEEP, None
        entries.append(MaskEntry(i, action, _target(tok, eps), rid))
    return MaskingPlan(entries, len(seq))


def check_plan(seq: TokenSequence, plan: MaskingPlan) -> None:
    if plan.length != len(seq):
        raise PlanMismatch(f"plan built for length {plan.length}, sequence has {len(seq)}")
    last = -1
    for e in plan.entries:
        if not last < e.index < len(seq):
            raise PlanMismatch(f"plan index {e.index} is out of order or out of range")
        last = e.index
        tok = seq.tokens[e.index]
        if tok.kind not in MASKABLE:
            raise PlanMismatch(f"position {e.index} holds a {tok.kind.value} token, which is never masked")
        if e.is_num != (tok.number is not None):
            raise PlanMismatch(f"target type at position {e.index} does not match the token")
