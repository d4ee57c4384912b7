"""Pre-training loop: from scratch (MLM only) or from a checkpoint (MLM + momentum distillation)."""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from numlex.errors import ConfigError
from numlex.numtok.rewrite import Kind, Mode, Token, TokenSequence, tokenize
from numlex.pretrain.host import HostModel
from numlex.pretrain.losses import (
    LossBreakdown,
    MomentumPair,
    alpha_schedule,
    blend,
    distill_terms,
    mlm_terms,
)
from numlex.pretrain.masking import build_masking_plan, frame
from numlex.rng import stream
from numlex.tensorcore import tensor as T
from numlex.tensorcore.optim import Adam, clip_grad_norm
from numlex.tensorcore.tensor import backward, no_grad

log = logging.getLogger(__name__)


class RunMode(str, enum.Enum):
    SCRATCH = "scratch"
    CHECKPOINT = "checkpoint"


@dataclass(frozen=True)
class PretrainConfig:
    mode: str = "scratch"
    steps: int = 200
    batch_size: int = 16
    lr: float = 1e-3
    mask_rate: float = 0.15
    eps: float = 1e-6
    tau: float = 0.995
    alpha_max: float = 0.5
    warmup_steps: int | None = None  # default: 10% of steps
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        RunMode(self.mode)
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("pretrain steps must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.mask_rate <= 1.0:
            raise ConfigError("mask_rate must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        if not 0.0 <= self.alpha_max <= 1.0:
            raise ConfigError("alpha_max must lie in [0, 1]")
        if self.eps <= 0 or self.lr < 0:
            raise ConfigError("eps must be > 0 and lr >= 0")
        if self.warmup_steps is not None and self.warmup_steps < 1:
            raise ConfigError("warmup_steps must be >= 1")

    @property
    def warmup(self) -> int:
        return self.warmup_steps if self.warmup_steps is not None else max(1, round(0.1 * self.steps))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PretrainResult:
    student: HostModel
    teacher: HostModel | None
    metrics: list[LossBreakdown] = field(default_factory=list)


def plain_sequence(text: str, tokenizer) -> TokenSequence:
    """Base tokenization only, with no number tokens (the plugin-free host's input)."""
    tokens = [Token(Kind.VOCAB, p.id, p.start, p.end) for p in tokenizer.encode(text)]
    return TokenSequence(tokens, Mode.ADD_BACK, [], text)


def prepare_corpus(docs, tokenizer, numtok_mode, max_len: int) -> list[TokenSequence]:
    """Frame every document; ``numtok_mode=None`` gives the plugin-free encoding."""
    out = []
    for text in docs:
        seq = plain_sequence(text, tokenizer) if numtok_mode is None else tokenize(text, tokenizer, numtok_mode)
        out.append(frame(seq, tokenizer.cls_id, tokenizer.sep_id, max_len))
    if not out:
        raise ConfigError("pre-training corpus is empty")
    return out


def sample_batch(seqs, cfg: PretrainConfig, step: int, vocab_size: int):
    """Batch ``step``: its documents and masking plans depend only on (seed, step)."""
    pick = stream(cfg.seed, "batch", step).integers(0, len(seqs), size=cfg.batch_size)
    batch = [seqs[i] for i in pick]
    plans = [build_masking_plan(s, stream(cfg.seed, "mask", step, j), cfg.mask_rate, vocab_size, cfg.eps)
             for j, s in enumerate(batch)]
    return batch, plans


def step_losses(student: HostModel, teacher: HostModel | None, seqs, plans, alpha: float):
    """Forward both models on one batch and assemble the loss terms."""
    entries = [e for p in plans for e in p.entries]
    is_num = [e.is_num for e in entries]
    reg_t = [e.target.target.as_pair() for e in entries if e.is_num]
    cla_t = [e.target.token_id for e in entries if not e.is_num]
    if not entries:
        return mlm_terms(None, None, [], [], [])
    batch = student.prepare(seqs, plans)
    reg, logits = student.heads(student.masked_outputs(batch))
    terms = mlm_terms(reg, logits, is_num, reg_t, cla_t)
    if teacher is not None:
        with no_grad():
            _, t_logits = teacher.heads(teacher.masked_outputs(teacher.prepare(seqs, plans)))
            p_m = T.softmax(t_logits, axis=-1).data
        terms.l_distill = distill_terms(logits, p_m, terms.k)
        terms.alpha = alpha
        terms.total = blend(terms.l_mlm, terms.l_distill, alpha)
    else:
        terms.total = terms.l_mlm
    return terms


def pretrain_run(docs, host: HostModel, tokenizer, cfg: PretrainConfig, numtok_mode="addback",
                 teacher: HostModel | None = None, on_step=None) -> PretrainResult:
    """Train ``host`` in place; returns it with the teacher (checkpoint mode) and per-step losses.

    In checkpoint mode the teacher starts as a frozen copy of ``host`` (unless
    one is passed) and receives a momentum update after every optimizer step.
    """
    mode = RunMode(cfg.mode)
    seqs = prepare_corpus(docs, tokenizer, numtok_mode, host.cfg.max_len)
    pair = None
    if mode is RunMode.CHECKPOINT:
        pair = MomentumPair(host, teacher if teacher is not None else host.clone(), cfg.tau)
    opt = Adam(host.params, lr=cfg.lr)
    metrics = []
    for step in range(cfg.steps):
        batch, plans = sample_batch(seqs, cfg, step, host.vocab_size)
        alpha = alpha_schedule(step, cfg.warmup, cfg.alpha_max) if pair else 0.0
        host.params.zero_grad()
        terms = step_losses(host, pair.teacher if pair else None, batch, plans, alpha)
        if terms.k > 0:
            backward(terms.total)
            if cfg.grad_clip > 0:
                clip_grad_norm(host.params, cfg.grad_clip)
            opt.step()
        if pair:
            pair.update()
        row = terms.breakdown(step)
        metrics.append(row)
        if on_step is not None:
            on_step(row)
        if step % 50 == 0:
            log.info("step %d k=%d l_mlm=%.4f total=%.4f", step, row.k, row.l_mlm, row.total)
    return PretrainResult(host, pair.teacher if pair else None, metrics)


def smoothed(values, window: int = 20) -> np.ndarray:
    """Trailing moving average (shorter windows at the start)."""
    values = np.asarray(values, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)


def bootstrap_checkpoint(docs, tokenizer, host_cfg, cfg: PretrainConfig, rng=None) -> HostModel:
    """Train a plugin-free host (no number tokens, no embedder) from scratch."""
    host = HostModel(host_cfg, tokenizer.vocab_size, None, rng if rng is not None else stream(cfg.seed, "host-init"))
    scratch = PretrainConfig(**{**cfg.to_dict(), "mode": "scratch"})
    pretrain_run(docs, host, tokenizer, scratch, numtok_mode=None)
    return host
