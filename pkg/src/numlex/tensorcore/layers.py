"""Layers built from tensor ops. Each layer registers its weights in a ParamSet.

Weight matrices are initialized uniform(-1/sqrt(fan_in), 1/sqrt(fan_in));
biases start at zero; layer-norm gains at one.
"""

from __future__ import annotations

import math

import numpy as np

from numlex.errors import ConfigError, ShapeMismatch
from numlex.tensorcore import tensor as T
from numlex.tensorcore.params import ParamSet
from numlex.tensorcore.tensor import Tensor

ACTIVATIONS = {"tanh": T.tanh, "relu": T.relu, "sigmoid": T.sigmoid}


def _positive(**dims):
    for k, v in dims.items():
        if not isinstance(v, (int, np.integer)) or v <= 0:
            raise ConfigError(f"{k} must be a positive integer, got {v!r}")


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, params: ParamSet, name: str, d_in: int, d_out: int, rng, bias=True):
        _positive(d_in=d_in, d_out=d_out)
        self.d_in, self.d_out = d_in, d_out
        self.weight = params.add(f"{name}.weight", uniform_init(rng, d_in, (d_in, d_out)))
        self.bias = params.add(f"{name}.bias", np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeMismatch("linear", x.shape, self.weight.shape)
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class Embedding:
    def __init__(self, params: ParamSet, name: str, num: int, dim: int, rng):
        _positive(num=num, dim=dim)
        self.num, self.dim = num, dim
        self.weight = params.add(f"{name}.weight", uniform_init(rng, dim, (num, dim)))

    def __call__(self, ids) -> Tensor:
        return T.embedding_lookup(self.weight, ids)


class LayerNorm:
    def __init__(self, params: ParamSet, name: str, dim: int, eps=1e-5):
        _positive(dim=dim)
        self.gamma = params.add(f"{name}.gamma", np.ones(dim))
        self.beta = params.add(f"{name}.beta", np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class MLP:
    """Linear layers with an activation between them (none after the last)."""

    def __init__(self, params: ParamSet, name: str, sizes, rng, activation="tanh"):
        sizes = list(sizes)
        if len(sizes) < 2:
            raise ConfigError("MLP needs at least input and output sizes")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.act = ACTIVATIONS[activation]
        self.layers = [Linear(params, f"{name}.{i}", a, b, rng) for i, (a, b) in enumerate(zip(sizes, sizes[1:]))]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.act(x)
        return x


class LSTM:
    """Multi-layer (optionally bidirectional) LSTM over right-padded batches.

    ``__call__(x, mask)`` takes x of shape (B, T, D) and a 0/1 mask (B, T)
    and returns ``(outputs, finals)``: outputs (B, T, H * directions) from
    the top layer and, for every layer and direction, the final hidden
    state (B, H). The forward direction's final state is taken after each
    sequence's last real character; the backward direction's after the first.
    """

    def __init__(self, params: ParamSet, name: str, d_in: int, hidden: int, layers=1,
                 bidirectional=True, rng=None):
        _positive(d_in=d_in, hidden=hidden, layers=layers)
        self.hidden, self.layers = hidden, layers
        self.directions = 2 if bidirectional else 1
        self.cells = []
        for layer in range(layers):
            width = d_in if layer == 0 else hidden * self.directions
            row = []
            for d in range(self.directions):
                pre = f"{name}.l{layer}.{'fw' if d == 0 else 'bw'}"
                w_x = params.add(f"{pre}.w_x", uniform_init(rng, width, (width, 4 * hidden)))
                w_h = params.add(f"{pre}.w_h", uniform_init(rng, hidden, (hidden, 4 * hidden)))
                b = params.add(f"{pre}.b", np.zeros(4 * hidden))
                row.append((w_x, w_h, b))
            self.cells.append(row)

    def _run(self, x: Tensor, mask: np.ndarray, weights, reverse: bool):
        w_x, w_h, b = weights
        bsz, steps, _ = x.shape
        zx = x @ w_x + b
        hc = Tensor(np.zeros((bsz, 2 * self.hidden)))
        outs = [None] * steps
        order = range(steps - 1, -1, -1) if reverse else range(steps)
        for t in order:
            hc = T.lstm_cell(zx[:, t, :], hc, w_h, mask[:, t])
            outs[t] = hc
        return outs, hc

    def __call__(self, x: Tensor, mask=None):
        bsz, steps, _ = x.shape
        mask = np.ones((bsz, steps)) if mask is None else np.asarray(mask, dtype=np.float64)
        finals = []
        h = self.hidden
        for row in self.cells:
            layer_outs = []
            for d, weights in enumerate(row):
                outs, last = self._run(x, mask, weights, reverse=(d == 1))
                finals.append(last[:, :h])
                layer_outs.append(T.stack(outs, axis=1)[:, :, :h])
            x = layer_outs[0] if len(layer_outs) == 1 else T.concat(layer_outs, axis=2)
        return x, finals

    def cell(self, x_t: Tensor, hc: Tensor, layer=0, direction=0) -> Tensor:
        w_x, w_h, b = self.cells[layer][direction]
        return T.lstm_cell(x_t @ w_x + b, hc, w_h)


class MultiHeadAttention:
    def __init__(self, params: ParamSet, name: str, d_model: int, heads: int, rng):
        _positive(d_model=d_model, heads=heads)
        if d_model % heads:
            raise ConfigError(f"d_model {d_model} not divisible by heads {heads}")
        self.d_model, self.heads = d_model, heads
        self.q = Linear(params, f"{name}.q", d_model, d_model, rng)
        self.k = Linear(params, f"{name}.k", d_model, d_model, rng)
        self.v = Linear(params, f"{name}.v", d_model, d_model, rng)
        self.o = Linear(params, f"{name}.o", d_model, d_model, rng)

    def _split(self, x: Tensor, bsz, steps) -> Tensor:
        dh = self.d_model // self.heads
        return x.reshape(bsz, steps, self.heads, dh).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, mask=None) -> Tensor:
        bsz, steps, _ = x.shape
        dh = self.d_model // self.heads
        q = self._split(self.q(x), bsz, steps)
        k = self._split(self.k(x), bsz, steps)
        v = self._split(self.v(x), bsz, steps)
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(dh))
        if mask is not None:
            keep = np.asarray(mask, dtype=np.float64)[:, None, None, :]
            scores = scores + Tensor(np.broadcast_to((keep - 1.0) * 1e9, scores.shape))
        attn = T.softmax(scores, axis=-1)
        ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(bsz, steps, self.d_model)
        return self.o(ctx)


class TransformerEncoderLayer:
    """Pre-norm encoder layer followed by a closing layer norm.

    out = LN_out(h + FF(LN_2(h))), where h = x + MHA(LN_1(x)).
    With all attention and feed-forward weights zero the layer reduces to
    LN_out(x).
    """

    def __init__(self, params: ParamSet, name: str, d_model: int, heads=4, d_ff=None, rng=None):
        d_ff = d_ff or 4 * d_model
        _positive(d_model=d_model, heads=heads, d_ff=d_ff)
        self.ln1 = LayerNorm(params, f"{name}.ln1", d_model)
        self.attn = MultiHeadAttention(params, f"{name}.attn", d_model, heads, rng)
        self.ln2 = LayerNorm(params, f"{name}.ln2", d_model)
        self.ff = MLP(params, f"{name}.ff", [d_model, d_ff, d_model], rng, activation="tanh")
        self.ln_out = LayerNorm(params, f"{name}.ln_out", d_model)

    def __call__(self, x: Tensor, mask=None) -> Tensor:
        h = x + self.attn(self.ln1(x), mask)
        h = h + self.ff(self.ln2(h))
        return self.ln_out(h)
