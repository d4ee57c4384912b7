"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op builds a new :class:`Tensor` holding its parents and a closure that
maps the output gradient to parent gradients. :func:`backward` walks the
graph in reverse topological order and accumulates gradients into leaf
tensors created with ``requires_grad=True``.

Binary elementwise ops accept equal shapes, a Python scalar, or bias-style
operands whose shape is a trailing suffix of the other operand's shape.
No other broadcasting is performed.
"""

from __future__ import annotations

import contextlib
import contextvars

import numpy as np

from numlex.errors import NotScalarLoss, ShapeMismatch

_grad_enabled = contextvars.ContextVar("numlex_grad_enabled", default=True)


@contextlib.contextmanager
def no_grad():
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def grad_enabled() -> bool:
    return _grad_enabled.get()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self.op = op

    # -- basics -------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self):
        return self.shape[0]

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward, op) -> Tensor:
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)


def _check_binary(op, a: Tensor, b: Tensor):
    sa, sb = a.shape, b.shape
    if sa == sb or sa == () or sb == ():
        return
    if len(sb) < len(sa) and sa[len(sa) - len(sb):] == sb:
        return
    if len(sa) < len(sb) and sb[len(sb) - len(sa):] == sa:
        return
    raise ShapeMismatch(op, sa, sb)


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead))) if lead else g


# -- elementwise -----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary("add", a, b)

    def bw(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary("sub", a, b)

    def bw(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary("mul", a, b)

    def bw(g):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary("div", a, b)

    def bw(g):
        return _reduce_to(g / b.data, a.shape), _reduce_to(-g * a.data / (b.data * b.data), b.shape)

    return _make(a.data / b.data, (a, b), bw, "div")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(x: Tensor) -> Tensor:
    on = x.data > 0
    return _make(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,), "relu")


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _make(y, (x,), lambda g: (g * y,), "exp")


def log(x: Tensor) -> Tensor:
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def square(x: Tensor) -> Tensor:
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


# -- linear algebra ----------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    if b.ndim == 2:
        k, m = b.shape

        def bw(g):
            ga = g @ b.data.T
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, m)
            return ga, gb

        return _make(a.data @ b.data, (a, b), bw, "matmul")
    if a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2]:
        raise ShapeMismatch("matmul", a.shape, b.shape)

    def bw(g):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return _make(a.data @ b.data, (a, b), bw, "bmm")


# -- reductions and shape ops --------------------------------------------------------

def sum_(x: Tensor, axis=None) -> Tensor:
    shape = x.shape

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _make(x.data.sum(axis=axis), (x,), bw, "sum")


def mean(x: Tensor, axis=None) -> Tensor:
    n = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum_(x, axis), 1.0 / n)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def _is_basic(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(x: Tensor, idx) -> Tensor:
    shape = x.shape
    basic = _is_basic(idx)

    def bw(g):
        out = np.zeros(shape)
        if basic:
            out[idx] += g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], (x,), bw, "getitem")


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(t.shape[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ShapeMismatch("concat", ref, t.shape)
    cuts = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, cuts, axis=ax))

    return _make(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), bw, "concat")


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeMismatch("stack", tensors[0].shape, t.shape)

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), bw, "stack")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` selected by an integer array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeMismatch("embedding_lookup", table.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range [0, {table.shape[0]})")
    rows = table.shape

    def bw(g):
        out = np.zeros(rows)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, rows[1]))
        return (out,)

    return _make(table.data[ids], (table,), bw, "embedding")


# -- normalization / probability ------------------------------------------------------

def softmax(x: Tensor, axis=-1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _make(s, (x,), bw, "softmax")


def log_softmax(x: Tensor, axis=-1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse
    s = np.exp(y)

    def bw(g):
        return (g - s * g.sum(axis=axis, keepdims=True),)

    return _make(y, (x,), bw, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps=1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatch("layer_norm", x.shape, gamma.shape, beta.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def bw(g):
        gx_hat = g * gamma.data
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        flat_g = g.reshape(-1, d)
        return gx, (flat_g * xhat.reshape(-1, d)).sum(axis=0), flat_g.sum(axis=0)

    return _make(xhat * gamma.data + beta.data, (x, gamma, beta), bw, "layer_norm")


# -- fused recurrent cell ----------------------------------------------------------------

def lstm_cell(zx: Tensor, hc: Tensor, w_h: Tensor, mask=None) -> Tensor:
    """One LSTM step.

    ``zx`` is the precomputed input projection plus bias, shape (B, 4H),
    gate order (input, forget, cell, output). ``hc`` packs the previous
    hidden and cell state as (B, 2H). ``mask`` of shape (B,) or (B, 1)
    freezes the state where it is 0 (padding). Returns the new packed state.
    """
    b, four_h = zx.shape
    h_dim = four_h // 4
    if hc.shape != (b, 2 * h_dim) or w_h.shape != (h_dim, four_h):
        raise ShapeMismatch("lstm_cell", zx.shape, hc.shape, w_h.shape)
    h_prev, c_prev = hc.data[:, :h_dim], hc.data[:, h_dim:]
    z = zx.data + h_prev @ w_h.data
    i = _sigmoid(z[:, :h_dim])
    f = _sigmoid(z[:, h_dim:2 * h_dim])
    gg = np.tanh(z[:, 2 * h_dim:3 * h_dim])
    o = _sigmoid(z[:, 3 * h_dim:])
    c_new = f * c_prev + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc
    if mask is None:
        m = None
        out = np.concatenate([h_new, c_new], axis=1)
    else:
        m = np.asarray(mask, dtype=np.float64).reshape(b, 1)
        out = np.concatenate([m * h_new + (1 - m) * h_prev, m * c_new + (1 - m) * c_prev], axis=1)

    def bw(g):
        gh, gc_out = g[:, :h_dim], g[:, h_dim:]
        gh_new = gh if m is None else m * gh
        gc_new = (gc_out if m is None else m * gc_out) + gh_new * o * (1.0 - tc * tc)
        dz = np.concatenate([
            gc_new * gg * i * (1.0 - i),
            gc_new * c_prev * f * (1.0 - f),
            gc_new * i * (1.0 - gg * gg),
            gh_new * tc * o * (1.0 - o),
        ], axis=1)
        gh_prev = dz @ w_h.data.T
        gc_prev = gc_new * f
        if m is not None:
            gh_prev = gh_prev + (1 - m) * gh
            gc_prev = gc_prev + (1 - m) * gc_out
        return dz, np.concatenate([gh_prev, gc_prev], axis=1), h_prev.T @ dz

    return _make(out, (zx, hc, w_h), bw, "lstm_cell")


# -- losses ----------------------------------------------------------------------

def _reduce(x: Tensor, reduction: str) -> Tensor:
    if reduction == "mean":
        return mean(x)
    if reduction == "sum":
        return sum_(x)
    if reduction == "none":
        return x
    raise ValueError(f"unknown reduction {reduction!r}")


def mse(pred: Tensor, target, reduction="mean") -> Tensor:
    """Squared error averaged over the last axis, then reduced over rows."""
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeMismatch("mse", pred.shape, target.shape)
    diff = sub(pred, target)
    per_row = mean(square(diff), axis=-1) if pred.ndim else square(diff)
    return _reduce(per_row, reduction)


def cross_entropy(logits: Tensor, targets, reduction="mean") -> Tensor:
    """Cross-entropy of integer class targets against unnormalized logits (N, C)."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeMismatch("cross_entropy", logits.shape, targets.shape)
    n = logits.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    per_row = lse - z[np.arange(n), targets]
    probs = np.exp(z - lse[:, None])

    def bw(g):
        d = probs.copy()
        d[np.arange(n), targets] -= 1.0
        return (d * g[:, None],)

    return _reduce(_make(per_row, (logits,), bw, "cross_entropy"), reduction)


# -- backprop ------------------------------------------------------------------------

def _topo(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every requires_grad leaf."""
    if loss.size != 1:
        raise NotScalarLoss(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
