"""Number embedders: map a recognized number string to a model_dim vector.

Three kinds are provided:

* CharLSTM: character lookup embedding -> multi-layer BiLSTM -> mean of the
  final hidden states over all layers and both directions -> linear map.
* CharFormer: character embedding plus a digit-significance positional
  embedding -> one transformer encoder layer -> BiLSTM -> same pooling and
  projection as CharLSTM.
* DICE: a fixed, parameter-free embedding of the log-magnitude as a point
  on the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from numlex.errors import ConfigError, DimMismatch, EmptyNumber
from numlex.numeric import DEFAULT_EPS, NumericValue, parse_value
from numlex.numtok.rewrite import Mode
from numlex.numtok.spans import DIGITS
from numlex.tensorcore import tensor as T
from numlex.tensorcore.layers import LSTM, Embedding, Linear, TransformerEncoderLayer
from numlex.tensorcore.params import ParamSet, load_checkpoint, save_checkpoint
from numlex.tensorcore.tensor import Tensor

KINDS = ("charlstm", "charformer", "dice")
PAD_SYMBOL, UNK_SYMBOL = "<pad>", "<unk>"
CHARS = DIGITS + "%+-.,"


class CharVocab:
    """Index 0 is padding, 1 is unknown, then the 15 number characters."""

    def __init__(self, chars: str = CHARS):
        self.symbols = [PAD_SYMBOL, UNK_SYMBOL] + list(chars)
        self.index = {c: i for i, c in enumerate(self.symbols)}
        self.pad, self.unk = 0, 1

    def __len__(self):
        return len(self.symbols)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(c, self.unk) for c in text]


def digit_positions(text: str) -> list[int | None]:
    """Signed position of each digit relative to the decimal point.

    Units digit is 0, tens 1, tenths -1. Non-digit characters get None.
    """
    point = text.find(".")
    int_end = point if point >= 0 else len(text)
    out: list[int | None] = [None] * len(text)
    pos = 0
    for i in range(int_end - 1, -1, -1):
        if text[i] in DIGITS:
            out[i] = pos
            pos += 1
    if point >= 0:
        pos = -1
        for i in range(point + 1, len(text)):
            if text[i] in DIGITS:
                out[i] = pos
                pos -= 1
    return out


# Desk-scale parameter ladders, roughly 1K / 10K / 100K parameters at model_dim 64.
SIZE_TIERS = {
    "0.1M": dict(char_embed_dim=8, lstm_hidden=4, lstm_layers=1),
    "1M": dict(char_embed_dim=16, lstm_hidden=24, lstm_layers=1),
    "9M": dict(char_embed_dim=32, lstm_hidden=50, lstm_layers=2),
}


@dataclass(frozen=True)
class NumBedConfig:
    kind: str = "charlstm"
    model_dim: int = 64
    char_embed_dim: int = 16
    lstm_layers: int = 1
    lstm_hidden: int = 24
    max_chars: int = 32
    heads: int = 4
    bidirectional: bool = True
    size_tier: str | None = "1M"
    # DICE angle range over ln(eps + |v|)
    eps: float = DEFAULT_EPS
    log_min: float = math.log(DEFAULT_EPS)
    log_max: float = math.log(1e10)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"numbed kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("model_dim", "char_embed_dim", "lstm_layers", "lstm_hidden", "max_chars", "heads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"numbed.{name} must be >= 1")
        if self.kind == "dice" and self.model_dim < 3:
            raise ConfigError("dice needs model_dim >= 3")
        if self.size_tier is not None and self.size_tier not in SIZE_TIERS:
            raise ConfigError(f"unknown size tier {self.size_tier!r}")
        if not self.log_max > self.log_min:
            raise ConfigError("numbed.log_max must exceed log_min")

    @classmethod
    def for_tier(cls, tier: str, **kwargs) -> "NumBedConfig":
        if tier not in SIZE_TIERS:
            raise ConfigError(f"unknown size tier {tier!r}")
        return cls(size_tier=tier, **{**SIZE_TIERS[tier], **kwargs})

    def to_dict(self) -> dict:
        return asdict(self)


def _truncate(text: str, max_chars: int) -> str:
    if not text:
        raise EmptyNumber("cannot embed an empty number string")
    return text[:max_chars]


class CharLSTMEmbedder:
    trainable = True

    def __init__(self, cfg: NumBedConfig, rng, params: ParamSet | None = None, prefix="numbed"):
        self.cfg = cfg
        self.vocab = CharVocab()
        self.params = ParamSet() if params is None else params
        self.prefix = prefix
        self._build(rng)

    @property
    def dim(self) -> int:
        return self.cfg.model_dim

    def _build(self, rng):
        c = self.cfg
        self.chars = Embedding(self.params, f"{self.prefix}.chars", len(self.vocab), c.char_embed_dim, rng)
        self.lstm = LSTM(self.params, f"{self.prefix}.lstm", c.char_embed_dim, c.lstm_hidden,
                         c.lstm_layers, c.bidirectional, rng)
        self.proj = Linear(self.params, f"{self.prefix}.proj", c.lstm_hidden, c.model_dim, rng)

    def _batch(self, texts):
        texts = [_truncate(t, self.cfg.max_chars) for t in texts]
        steps = max(len(t) for t in texts)
        ids = np.zeros((len(texts), steps), dtype=np.int64)
        mask = np.zeros((len(texts), steps))
        for i, t in enumerate(texts):
            ids[i, :len(t)] = self.vocab.encode(t)
            mask[i, :len(t)] = 1.0
        return texts, ids, mask

    def _inputs(self, texts, ids, mask) -> Tensor:
        return self.chars(ids)

    def _encode(self, x: Tensor, mask) -> Tensor:
        _, finals = self.lstm(x, mask)
        pooled = finals[0] if len(finals) == 1 else T.mean(T.stack(finals, axis=0), axis=0)
        return self.proj(pooled)

    def embed_batch(self, texts) -> Tensor:
        """(len(texts), model_dim) embeddings for a list of number strings."""
        if not len(texts):
            return Tensor(np.zeros((0, self.dim)))
        texts, ids, mask = self._batch(list(texts))
        return self._encode(self._inputs(texts, ids, mask), mask)

    def embed(self, text: str) -> Tensor:
        return self.embed_batch([text])[0]


class CharFormerEmbedder(CharLSTMEmbedder):
    def _build(self, rng):
        c = self.cfg
        if c.char_embed_dim % c.heads:
            raise ConfigError(f"charformer char_embed_dim {c.char_embed_dim} not divisible by heads {c.heads}")
        super()._build(rng)
        # rows 0..2*max_chars hold positions -max_chars..max_chars; the last row is the sentinel
        self.max_pos = c.max_chars
        self.positions = Embedding(self.params, f"{self.prefix}.positions", 2 * self.max_pos + 2,
                                   c.char_embed_dim, rng)
        self.encoder = TransformerEncoderLayer(self.params, f"{self.prefix}.encoder", c.char_embed_dim,
                                               heads=c.heads, rng=rng)

    def position_ids(self, text: str) -> list[int]:
        sentinel = 2 * self.max_pos + 1
        out = []
        for p in digit_positions(text):
            if p is None:
                out.append(sentinel)
            else:
                out.append(max(-self.max_pos, min(self.max_pos, p)) + self.max_pos)
        return out

    def _inputs(self, texts, ids, mask) -> Tensor:
        pos = np.full(ids.shape, 2 * self.max_pos + 1, dtype=np.int64)
        for i, t in enumerate(texts):
            pos[i, :len(t)] = self.position_ids(t)
        return self.chars(ids) + self.positions(pos)

    def _encode(self, x: Tensor, mask) -> Tensor:
        return super()._encode(self.encoder(x, mask), mask)


class DiceEmbedder:
    """Parameter-free log-magnitude embedding on the unit sphere.

    The angle theta = pi * (ln(eps + |v|) - log_min) / (log_max - log_min),
    clipped to [0, pi], places the magnitude on a great circle spanned by two
    fixed orthonormal directions; a reserved last coordinate carries the sign.
    The cosine similarity of two same-sign embeddings is
    (1 - w^2) cos(delta theta) + w^2, decreasing in the angle gap.
    """

    trainable = False
    SIGN_WEIGHT = 0.5

    def __init__(self, cfg: NumBedConfig, rng=None, params: ParamSet | None = None, prefix="numbed"):
        self.cfg = cfg
        self.params = ParamSet() if params is None else params
        # fixed basis independent of any run seed, for determinism across runs
        q, _ = np.linalg.qr(np.random.default_rng(20200607).normal(size=(cfg.model_dim - 1, 2)))
        self.basis = q.T  # (2, model_dim - 1)

    @property
    def dim(self) -> int:
        return self.cfg.model_dim

    def angle(self, value: float) -> float:
        c = self.cfg
        lg = math.log(c.eps + abs(value))
        frac = (lg - c.log_min) / (c.log_max - c.log_min)
        return math.pi * min(1.0, max(0.0, frac))

    def embed_values(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        theta = np.array([self.angle(v) for v in values])
        plane = np.stack([np.cos(theta), np.sin(theta)], axis=1) @ self.basis
        sign = np.where(values < 0, -1.0, 1.0)[:, None]
        w = self.SIGN_WEIGHT
        return np.concatenate([math.sqrt(1 - w * w) * plane, w * sign], axis=1)

    def embed_value(self, v: NumericValue | float) -> np.ndarray:
        x = v.value if isinstance(v, NumericValue) else float(v)
        return self.embed_values([x])[0]

    def embed_batch(self, texts) -> Tensor:
        return Tensor(self.embed_values([parse_value(t).value for t in texts]).reshape(len(texts), self.dim))

    def embed(self, text: str) -> Tensor:
        return self.embed_batch([text])[0]


# ---- functional API --------------------------------------------------------------

def build_embedder(cfg: NumBedConfig, rng=None, params: ParamSet | None = None, prefix="numbed"):
    rng = np.random.default_rng(0) if rng is None else rng
    cls = {"charlstm": CharLSTMEmbedder, "charformer": CharFormerEmbedder, "dice": DiceEmbedder}[cfg.kind]
    return cls(cfg, rng, params, prefix)


def _bound(params: ParamSet, cfg: NumBedConfig, kind: str):
    if cfg.kind != kind:
        cfg = replace(cfg, kind=kind)
    emb = build_embedder(cfg, np.random.default_rng(0))
    emb.params.load_state(params)
    return emb


def embed_charlstm(num: str, params: ParamSet, cfg: NumBedConfig) -> Tensor:
    """Embed with CharLSTM weights taken from ``params`` (a fresh, detached copy)."""
    return _bound(params, cfg, "charlstm").embed(num)


def embed_charformer(num: str, params: ParamSet, cfg: NumBedConfig) -> Tensor:
    return _bound(params, cfg, "charformer").embed(num)


def embed_dice(v: NumericValue | float, cfg: NumBedConfig) -> np.ndarray:
    return DiceEmbedder(replace(cfg, kind="dice")).embed_value(v)


def combine(mode, num_vec, base_vecs):
    """Input rows contributed by one number under the given numtok mode.

    AddBack: the base rows followed by the number row. Replace: only the
    number row. AddOnEmbedding: the number vector added to every base row.
    """
    mode = Mode.parse(mode)
    num = np.asarray(num_vec.data if isinstance(num_vec, Tensor) else num_vec, dtype=np.float64)
    rows = [np.asarray(b.data if isinstance(b, Tensor) else b, dtype=np.float64) for b in base_vecs]
    for r in rows:
        if r.shape != num.shape:
            raise DimMismatch("combine", num.shape, r.shape)
    if mode is Mode.ADD_BACK:
        return rows + [num]
    if mode is Mode.REPLACE:
        return [num]
    return [r + num for r in rows]


def save_embedder(path, emb) -> None:
    save_checkpoint(path, emb.params, {"numbed": emb.cfg.to_dict()})


def load_embedder(path):
    state, config = load_checkpoint(path)
    cfg = NumBedConfig(**config["numbed"])
    emb = build_embedder(cfg)
    emb.params.load_state(state)
    return emb
