"""A small transformer encoder that hosts a number embedder.

Input rows come from the token-embedding table for vocabulary tokens and
from the number embedder for ``<num ?>`` tokens. Masked positions take the
[MASK] row (or a random vocabulary row), as decided by a MaskingPlan. Both
heads read the same final hidden state of a masked position.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from numlex.errors import ArchMismatch, ConfigError, PlanMismatch
from numlex.numbed import NumBedConfig, build_embedder
from numlex.numtok.base import SPECIAL_TOKENS, tokenizer_from_dict
from numlex.numtok.rewrite import Kind, Mode, TokenSequence
from numlex.pretrain.masking import Action, MaskingPlan, check_plan
from numlex.tensorcore import tensor as T
from numlex.tensorcore.layers import MLP, Embedding, TransformerEncoderLayer
from numlex.tensorcore.params import ParamSet, read_checkpoint, checkpoint_state, save_checkpoint
from numlex.tensorcore.tensor import Tensor

PAD_ID, MASK_ID = SPECIAL_TOKENS.index("[PAD]"), SPECIAL_TOKENS.index("[MASK]")
NUMBED_PREFIX = "numbed."


@dataclass(frozen=True)
class HostConfig:
    model_dim: int = 64
    layers: int = 2
    heads: int = 4
    max_len: int = 128
    d_ff: int | None = None
    head_hidden: int | None = None

    def __post_init__(self):
        for name in ("model_dim", "layers", "heads", "max_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"host.{name} must be >= 1")
        if self.model_dim % self.heads:
            raise ConfigError(f"host model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.max_len < 3:
            raise ConfigError("host.max_len must be >= 3")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Batch:
    ids: np.ndarray       # (B, T) rows of the lookup table
    extra: np.ndarray     # (B, T) second row added on top (AddOnEmbedding); points at the zero row otherwise
    key_mask: np.ndarray  # (B, T) 1 for real tokens
    numbers: list[str]    # distinct number strings, table rows vocab_size + i
    masked: list[tuple[int, int]]  # (batch row, position) in plan order


class HostModel:
    def __init__(self, cfg: HostConfig, vocab_size: int, numbed_cfg: NumBedConfig | None = None, rng=None):
        if vocab_size <= len(SPECIAL_TOKENS):
            raise ConfigError("host vocabulary must contain tokens beyond the specials")
        rng = np.random.default_rng(0) if rng is None else rng
        self.cfg, self.vocab_size = cfg, vocab_size
        d = cfg.model_dim
        self.params = ParamSet()
        self.tok = Embedding(self.params, "host.tok", vocab_size, d, rng)
        self.pos = Embedding(self.params, "host.pos", cfg.max_len, d, rng)
        self.layers = [TransformerEncoderLayer(self.params, f"host.enc{i}", d, cfg.heads, cfg.d_ff, rng)
                       for i in range(cfg.layers)]
        hh = cfg.head_hidden or d
        self.head_cla = MLP(self.params, "host.head_cla", [d, hh, vocab_size], rng, activation="tanh")
        self.head_reg = MLP(self.params, "host.head_reg", [d, hh, 2], rng, activation="tanh")
        # the embedder is built last so a plugin-free host shares its initial weights
        self.numbed_cfg = None if numbed_cfg is None else replace(numbed_cfg, model_dim=d)
        self.numbed = None
        if self.numbed_cfg is not None:
            self.numbed = build_embedder(self.numbed_cfg, rng, self.params, NUMBED_PREFIX.rstrip("."))

    def config(self) -> dict:
        return {"host": self.cfg.to_dict(), "vocab_size": self.vocab_size,
                "numbed": None if self.numbed_cfg is None else self.numbed_cfg.to_dict()}

    def clone(self) -> "HostModel":
        twin = HostModel(self.cfg, self.vocab_size, self.numbed_cfg, np.random.default_rng(0))
        twin.params.load_state(self.params)
        return twin

    # -- inputs -------------------------------------------------------------------

    def prepare(self, seqs: list[TokenSequence], plans: list[MaskingPlan] | None = None) -> Batch:
        if not seqs:
            raise ConfigError("empty batch")
        plans = plans if plans is not None else [MaskingPlan([], len(s)) for s in seqs]
        if len(plans) != len(seqs):
            raise PlanMismatch(f"{len(plans)} plans for {len(seqs)} sequences")
        steps = max(len(s) for s in seqs)
        if steps > self.cfg.max_len:
            raise ConfigError(f"sequence of length {steps} exceeds host max_len {self.cfg.max_len}")
        numbers = sorted({t.number.text for s in seqs for t in s.tokens if t.number is not None})
        if numbers and self.numbed is None:
            raise ConfigError("sequence contains numbers but the host has no number embedder")
        where = {n: self.vocab_size + i for i, n in enumerate(numbers)}
        zero_row = self.vocab_size + len(numbers)
        ids = np.full((len(seqs), steps), PAD_ID, dtype=np.int64)
        extra = np.full((len(seqs), steps), zero_row, dtype=np.int64)
        key_mask = np.zeros((len(seqs), steps))
        masked = []
        for b, (seq, plan) in enumerate(zip(seqs, plans)):
            check_plan(seq, plan)
            key_mask[b, :len(seq)] = 1.0
            for i, tok in enumerate(seq.tokens):
                if tok.kind is Kind.NUM:
                    ids[b, i] = where[tok.number.text]
                else:
                    ids[b, i] = tok.id
                    if tok.number is not None and seq.mode is Mode.ADD_ON_EMBEDDING:
                        extra[b, i] = where[tok.number.text]
            for e in plan.entries:
                masked.append((b, e.index))
                if e.action is Action.MASK:
                    ids[b, e.index], extra[b, e.index] = MASK_ID, zero_row
                elif e.action is Action.RANDOM:
                    ids[b, e.index], extra[b, e.index] = e.random_id, zero_row
        return Batch(ids, extra, key_mask, numbers, masked)

    def input_rows(self, batch: Batch) -> Tensor:
        """(B, T, d) token-level input rows, before position embeddings."""
        parts = [self.tok.weight]
        if batch.numbers:
            parts.append(self.numbed.embed_batch(batch.numbers))
        parts.append(Tensor(np.zeros((1, self.cfg.model_dim))))
        table = T.concat(parts, axis=0)
        rows = T.embedding_lookup(table, batch.ids)
        if (batch.extra != table.shape[0] - 1).any():
            rows = rows + T.embedding_lookup(table, batch.extra)
        return rows

    def encode(self, batch: Batch) -> Tensor:
        steps = batch.ids.shape[1]
        pos = np.broadcast_to(np.arange(steps), batch.ids.shape)
        h = self.input_rows(batch) + self.pos(pos)
        for layer in self.layers:
            h = layer(h, batch.key_mask)
        return h

    def masked_outputs(self, batch: Batch) -> Tensor:
        h = self.encode(batch)
        bsz, steps, d = h.shape
        flat = np.array([b * steps + i for b, i in batch.masked], dtype=np.int64)
        return h.reshape(bsz * steps, d)[flat]

    def heads(self, o: Tensor) -> tuple[Tensor, Tensor]:
        """(regression (k, 2), vocabulary logits (k, V))."""
        return self.head_reg(o), self.head_cla(o)


def apply_plan(seq: TokenSequence, plan: MaskingPlan, numbed, host: HostModel) -> Tensor:
    """Input embedding rows (T, d) for one sequence under a masking plan.

    ``numbed`` must be the host's own embedder (or None to use it implicitly).
    """
    if numbed is not None and numbed is not host.numbed:
        raise ConfigError("apply_plan expects the embedder owned by the host")
    return host.input_rows(host.prepare([seq], [plan]))[0]


# -- checkpoints ------------------------------------------------------------------

def save_host(path, host: HostModel, tokenizer=None, extra: dict | None = None) -> None:
    config = host.config()
    if tokenizer is not None:
        config["tokenizer"] = tokenizer.to_dict()
    config.update(extra or {})
    save_checkpoint(path, host.params, config)


def load_host(path, numbed_cfg: NumBedConfig | None = None, keep_numbed: bool = True, rng=None):
    """Rebuild a host from a checkpoint. Returns (host, tokenizer or None, config).

    With ``numbed_cfg`` given, the host gets that embedder; parameters the
    checkpoint lacks are allowed only under the ``numbed.`` prefix and keep
    their fresh initialization (a plugin-free bootstrap checkpoint).
    """
    doc = read_checkpoint(path)
    config = doc.get("config", {})
    state = checkpoint_state(doc)
    if numbed_cfg is None and keep_numbed and config.get("numbed"):
        numbed_cfg = NumBedConfig(**config["numbed"])
    host = HostModel(HostConfig(**config["host"]), int(config["vocab_size"]), numbed_cfg, rng)
    names = set(host.params.names())
    unknown = [k for k in state if k not in names and not k.startswith(NUMBED_PREFIX)]
    missing = [k for k in names if k not in state and not k.startswith(NUMBED_PREFIX)]
    if unknown or missing:
        raise ArchMismatch(f"checkpoint does not fit the host: unknown {unknown[:3]}, missing {missing[:3]}")
    for name, p in host.params.items():
        if name in state:
            if state[name].shape != p.shape:
                raise ArchMismatch(f"{name}: checkpoint shape {state[name].shape} vs host {p.shape}")
            p.data = state[name].copy()
    tok = tokenizer_from_dict(config["tokenizer"]) if "tokenizer" in config else None
    return host, tok, config
