"""Shallow probes over number embeddings, and their metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from numlex.errors import ConfigError, LengthMismatch
from numlex.numeric import SigExp
from numlex.probing.tasks import TaskKind, make_task
from numlex.rng import stream
from numlex.tensorcore import tensor as T
from numlex.tensorcore.layers import MLP
from numlex.tensorcore.optim import Adam
from numlex.tensorcore.params import ParamSet
from numlex.tensorcore.tensor import Tensor, backward, no_grad


@dataclass(frozen=True)
class ProbeMetrics:
    rmse_sig: float | None = None
    acc_exp: float | None = None
    acc: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ProbeConfig:
    hidden: int = 128
    hidden_layers: int = 2
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 128
    train_frac: float = 0.8
    train_embedder: bool = True
    e_min: int = -4
    e_max: int = 8

    def __post_init__(self):
        if self.hidden < 1 or self.hidden_layers < 1 or self.batch_size < 1:
            raise ConfigError("probe hidden, hidden_layers and batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("probe epochs must be >= 0")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError("probe train_frac must lie in (0, 1)")
        if self.e_min > self.e_max:
            raise ConfigError("probe e_min must not exceed e_max")
        if not self.lr >= 0:
            raise ConfigError("probe lr must be >= 0")

    @property
    def n_bins(self) -> int:
        return self.e_max - self.e_min + 1


def evaluate(preds, golds, kind) -> ProbeMetrics:
    """RMSE of significands and exponent accuracy, or index accuracy for list max."""
    kind = TaskKind.parse(kind)
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions for {len(golds)} gold labels")
    if not golds:
        return ProbeMetrics()
    if kind is TaskKind.LIST_MAX:
        hits = sum(int(p) == int(g) for p, g in zip(preds, golds))
        return ProbeMetrics(acc=hits / len(golds))
    sq = sum((p.significand - g.significand) ** 2 for p, g in zip(preds, golds))
    hits = sum(p.exponent == g.exponent for p, g in zip(preds, golds))
    return ProbeMetrics(rmse_sig=math.sqrt(sq / len(golds)), acc_exp=hits / len(golds))


def split_tasks(tasks, train_frac: float, seed: int):
    order = stream(seed, "split").permutation(len(tasks))
    cut = int(round(train_frac * len(tasks)))
    return [tasks[i] for i in order[:cut]], [tasks[i] for i in order[cut:]]


@dataclass
class ProbeResult:
    metrics: ProbeMetrics
    train_metrics: ProbeMetrics
    losses: list[float] = field(default_factory=list)
    probe_params: ParamSet | None = None


class Probe:
    def __init__(self, embedder, kind: TaskKind, n_inputs: int, cfg: ProbeConfig, rng):
        self.embedder, self.kind, self.cfg = embedder, kind, cfg
        self.n_inputs = n_inputs
        self.params = ParamSet()
        out = n_inputs if kind is TaskKind.LIST_MAX else 1 + cfg.n_bins
        sizes = [n_inputs * embedder.dim] + [cfg.hidden] * cfg.hidden_layers + [out]
        self.mlp = MLP(self.params, "probe", sizes, rng, activation="relu")
        self._frozen_cache: dict[str, np.ndarray] = {}

    @property
    def joint(self) -> bool:
        return self.cfg.train_embedder and getattr(self.embedder, "trainable", False)

    def trainable_params(self) -> ParamSet:
        ps = ParamSet()
        for k, v in self.params.items():
            ps._params[k] = v
        if self.joint:
            for k, v in self.embedder.params.items():
                ps._params[k] = v
        return ps

    def _embed(self, strings: list[str]) -> Tensor:
        if self.joint:
            return self.embedder.embed_batch(strings)
        missing = [s for s in strings if s not in self._frozen_cache]
        if missing:
            with no_grad():
                rows = self.embedder.embed_batch(missing).data
            for s, r in zip(missing, rows):
                self._frozen_cache[s] = r
        return Tensor(np.stack([self._frozen_cache[s] for s in strings]))

    def forward(self, tasks) -> Tensor:
        unique = sorted({s for t in tasks for s in t.inputs})
        where = {s: i for i, s in enumerate(unique)}
        rows = self._embed(unique)
        ids = np.array([[where[s] for s in t.inputs] for t in tasks], dtype=np.int64)
        x = T.embedding_lookup(rows, ids).reshape(len(tasks), self.n_inputs * self.embedder.dim)
        return self.mlp(x)

    def loss(self, out: Tensor, tasks) -> Tensor:
        if self.kind is TaskKind.LIST_MAX:
            return T.cross_entropy(out, [t.gold for t in tasks])
        c = self.cfg
        sig = np.array([[t.gold.significand] for t in tasks])
        bins = np.array([min(c.e_max, max(c.e_min, t.gold.exponent)) - c.e_min for t in tasks])
        return T.mse(out[:, :1], sig) + T.cross_entropy(out[:, 1:], bins)

    def predict(self, tasks, batch_size=512):
        preds = []
        with no_grad():
            for i in range(0, len(tasks), batch_size):
                out = self.forward(tasks[i:i + batch_size]).data
                if self.kind is TaskKind.LIST_MAX:
                    preds.extend(int(j) for j in out.argmax(axis=1))
                else:
                    exps = out[:, 1:].argmax(axis=1) + self.cfg.e_min
                    preds.extend(SigExp(float(s), int(e)) for s, e in zip(out[:, 0], exps))
        return preds


def train_probe(embedder, tasks, cfg: ProbeConfig = ProbeConfig(), seed: int = 0) -> ProbeResult:
    """Fit a probe (and, in joint mode, the embedder) and score it on a held-out split."""
    if not tasks:
        raise ConfigError("train_probe needs at least one task")
    kind = tasks[0].kind
    n_inputs = len(tasks[0].inputs)
    if any(t.kind is not kind or len(t.inputs) != n_inputs for t in tasks):
        raise ConfigError("all tasks in a probe run must share the same kind and arity")
    train, test = split_tasks(tasks, cfg.train_frac, seed)
    probe = Probe(embedder, kind, n_inputs, cfg, stream(seed, "probe-init"))
    params = probe.trainable_params()
    opt = Adam(params, lr=cfg.lr)
    losses = []
    for epoch in range(cfg.epochs):
        order = stream(seed, "shuffle", epoch).permutation(len(train))
        for i in range(0, len(train), cfg.batch_size):
            batch = [train[j] for j in order[i:i + cfg.batch_size]]
            params.zero_grad()
            loss = probe.loss(probe.forward(batch), batch)
            backward(loss)
            opt.step()
            losses.append(loss.item())
    metrics = evaluate(probe.predict(test), [t.gold for t in test], kind)
    train_metrics = evaluate(probe.predict(train), [t.gold for t in train], kind)
    return ProbeResult(metrics, train_metrics, losses, probe.params)


def probe_tasks(task, seed: int, numbers=None, gen_cfg=None, list_len: int = 5):
    """The task set ``run_probe`` uses for a seed (also what ``probe gen`` writes)."""
    from dataclasses import replace

    from numlex.probing.gen import NumberGenConfig, generate_numbers

    if numbers is None:
        gen_cfg = replace(gen_cfg or NumberGenConfig(), seed=seed)
        numbers = generate_numbers(gen_cfg, stream(seed, "numbers"))
    return make_task(task, numbers, stream(seed, "tasks"), list_len=list_len)


def run_probe(kind: str, task, seed: int, *, tasks=None, numbers=None, gen_cfg=None,
              probe_cfg: ProbeConfig = ProbeConfig(), numbed_cfg=None, list_len: int = 5) -> ProbeResult:
    """Generate (or reuse) a number pool, build tasks and one embedder, and probe it.

    Every random choice hangs off ``seed`` through named streams, so two
    embedders probed with the same seed see the same tasks and split.
    """
    from dataclasses import replace

    from numlex.numbed import NumBedConfig, build_embedder

    if tasks is None:
        tasks = probe_tasks(task, seed, numbers, gen_cfg, list_len)
    cfg = replace(numbed_cfg or NumBedConfig(), kind=kind)
    embedder = build_embedder(cfg, stream(seed, "numbed-init"))
    return train_probe(embedder, tasks, probe_cfg, seed)


def compare_embedders(kinds, task, seeds, **kwargs) -> dict[str, list[ProbeMetrics]]:
    """Held-out metrics for each embedder kind, one entry per seed."""
    return {k: [run_probe(k, task, s, **kwargs).metrics for s in seeds] for k in kinds}
