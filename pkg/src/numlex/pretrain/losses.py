"""Masked-recovery losses, momentum distillation and the warm-up blend."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from numlex.errors import ArchMismatch, ConfigError, NonDistribution, ShapeMismatch
from numlex.tensorcore import tensor as T
from numlex.tensorcore.params import ParamSet
from numlex.tensorcore.tensor import Tensor


@dataclass(frozen=True)
class LossBreakdown:
    l_reg: float
    l_cla: float
    l_mlm: float
    l_distill: float = 0.0
    total: float = 0.0
    alpha: float = 0.0
    k: int = 0
    n_num: int = 0
    step: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossTerms:
    """Differentiable loss pieces for one step; ``breakdown()`` turns them into floats."""

    l_reg: Tensor
    l_cla: Tensor
    l_mlm: Tensor
    k: int
    n_num: int
    l_distill: Tensor | None = None
    total: Tensor | None = None
    alpha: float = 0.0

    def breakdown(self, step: int | None = None) -> LossBreakdown:
        l_distill = self.l_distill.item() if self.l_distill is not None else 0.0
        total = self.total.item() if self.total is not None else self.l_mlm.item()
        return LossBreakdown(self.l_reg.item(), self.l_cla.item(), self.l_mlm.item(), l_distill, total,
                             self.alpha, self.k, self.n_num, step)


def _zero() -> Tensor:
    return Tensor(np.array(0.0))


def mlm_terms(reg_out: Tensor, logits: Tensor, is_num, reg_targets, cla_targets) -> LossTerms:
    """Summed regression and classification losses over the k masked positions.

    ``reg_out`` (k, 2) and ``logits`` (k, V) hold both heads applied to every
    masked output; ``is_num`` picks which rows are supervised by regression.
    ``reg_targets`` (n, 2) and ``cla_targets`` (k - n,) follow row order.
    """
    is_num = np.asarray(is_num, dtype=bool)
    k = int(is_num.size)
    if k == 0:
        return LossTerms(_zero(), _zero(), _zero(), 0, 0)
    rows_n = np.flatnonzero(is_num)
    rows_t = np.flatnonzero(~is_num)
    reg_targets = np.asarray(reg_targets, dtype=np.float64).reshape(len(rows_n), 2)
    l_reg = T.mse(reg_out[rows_n], reg_targets, reduction="sum") if len(rows_n) else _zero()
    l_cla = T.cross_entropy(logits[rows_t], cla_targets, reduction="sum") if len(rows_t) else _zero()
    l_mlm = (l_reg + l_cla) / float(k)
    return LossTerms(l_reg, l_cla, l_mlm, k, len(rows_n))


def mlm_loss(reg_out, logits, plan) -> LossBreakdown:
    """L_REG, L_CLA and L_MLM for one masking plan (rows in plan-entry order)."""
    is_num = [e.is_num for e in plan.entries]
    reg_t = [e.target.target.as_pair() for e in plan.entries if e.is_num]
    cla_t = [e.target.token_id for e in plan.entries if not e.is_num]
    terms = mlm_terms(T.as_tensor(reg_out), T.as_tensor(logits), is_num, reg_t, cla_t)
    return terms.breakdown()


def check_distribution(probs, tol: float = 1e-6) -> np.ndarray:
    p = np.asarray(probs.data if isinstance(probs, Tensor) else probs, dtype=np.float64)
    if p.ndim != 2:
        raise NonDistribution(f"expected (k, V) probability rows, got shape {p.shape}")
    sums = p.sum(axis=1)
    bad = np.flatnonzero((np.abs(sums - 1.0) > tol) | (p < 0).any(axis=1))
    if bad.size:
        raise NonDistribution(f"row {int(bad[0])} sums to {sums[bad[0]]!r}")
    return p


def distill_terms(student_logits: Tensor, teacher_probs, k: int) -> Tensor:
    """(1/k) sum over rows of the soft cross-entropy -sum_c p_m[c] ln p[c]."""
    p_m = check_distribution(teacher_probs)
    if p_m.shape != student_logits.shape:
        raise ShapeMismatch("distill", student_logits.shape, p_m.shape)
    if k == 0:
        return _zero()
    logp = T.log_softmax(student_logits, axis=-1)
    return T.sum_(T.mul(Tensor(p_m), logp)) * (-1.0 / k)


def distill_loss(student_probs, teacher_probs, plan=None) -> float:
    """Soft cross-entropy of student rows against teacher soft labels, averaged over k."""
    p = check_distribution(student_probs)
    p_m = check_distribution(teacher_probs)
    if p.shape != p_m.shape:
        raise ShapeMismatch("distill", p.shape, p_m.shape)
    k = plan.k if plan is not None else p.shape[0]
    if k == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    # 0 * log 0 contributes nothing
    contrib = np.where(p_m > 0, p_m * logp, 0.0)
    return float(-contrib.sum() / k)


def blend(l_mlm: Tensor, l_distill: Tensor, alpha: float) -> Tensor:
    if alpha == 0.0:
        return l_mlm
    return l_mlm * (1.0 - alpha) + l_distill * alpha


def alpha_schedule(step: int, warmup_steps: int, alpha_max: float) -> float:
    """Linear warm-up from 0 to ``alpha_max`` over ``warmup_steps``, flat afterwards."""
    if warmup_steps < 1:
        raise ConfigError("warmup_steps must be >= 1")
    if not 0.0 <= alpha_max <= 1.0:
        raise ConfigError("alpha_max must lie in [0, 1]")
    return alpha_max * min(1.0, max(step, 0) / warmup_steps)


def momentum_update(teacher: ParamSet, student: ParamSet, tau: float) -> None:
    """In place: p_m <- tau * p_m + (1 - tau) * p for every parameter pair."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")
    if teacher.names() != student.names():
        raise ArchMismatch("teacher and student parameter names differ")
    for (name, pm), p in zip(teacher.items(), student.values()):
        if pm.shape != p.shape:
            raise ArchMismatch(f"{name}: teacher shape {pm.shape} vs student {p.shape}")
        if tau == 0.0:
            pm.data = p.data.copy()
        else:
            # increment form keeps teacher == student a bitwise fixed point
            pm.data = pm.data + (1.0 - tau) * (p.data - pm.data)


@dataclass
class MomentumPair:
    student: object
    teacher: object
    tau: float = 0.995

    def __post_init__(self):
        if self.student.params.names() != self.teacher.params.names():
            raise ArchMismatch("teacher and student architectures differ")
        self.teacher.params.freeze()

    def update(self) -> None:
        momentum_update(self.teacher.params, self.student.params, self.tau)

    def gap(self) -> float:
        return float(np.linalg.norm(self.teacher.params.flat() - self.student.params.flat()))
