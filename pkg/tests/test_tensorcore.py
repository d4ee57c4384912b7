import math

import numpy as np
import pytest

from oracles import naive_matmul
from numlex.errors import ConfigError, MissingGradient, NotScalarLoss, ShapeMismatch
from numlex.gradcheck import check_gradients
from numlex.tensorcore import tensor as T
from numlex.tensorcore.layers import (
    LSTM,
    MLP,
    Embedding,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    TransformerEncoderLayer,
)
from numlex.tensorcore.optim import SGD, Adam, clip_grad_norm, make_optimizer
from numlex.tensorcore.params import ParamSet, load_checkpoint, save_checkpoint
from numlex.tensorcore.tensor import Tensor, backward, no_grad

TOL = 1e-4


def probe_loss(out: Tensor, weights: np.ndarray) -> Tensor:
    """A scalar with non-trivial gradient everywhere: sum(out * W)."""
    return T.sum_(T.mul(out, Tensor(weights)))


# -- forward ops -----------------------------------------------------------------------

class TestOps:
    def test_softmax_symmetric(self):
        np.testing.assert_array_equal(T.softmax(Tensor(np.zeros(2))).data, [0.5, 0.5])

    def test_softmax_rows_sum_to_one(self, rng):
        p = T.softmax(Tensor(rng.normal(size=(50, 7)) * 30)).data
        assert np.abs(p.sum(axis=1) - 1).max() <= 1e-12

    def test_cross_entropy_uniform(self):
        assert T.cross_entropy(Tensor(np.zeros((1, 2))), [0]).item() == pytest.approx(math.log(2), abs=1e-15)

    def test_matmul_naive(self, rng):
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
        np.testing.assert_allclose(T.matmul(Tensor(a), Tensor(b)).data, naive_matmul(a.tolist(), b.tolist()),
                                   rtol=1e-14)

    def test_batched_matmul(self, rng):
        a, b = rng.normal(size=(2, 3, 4, 5)), rng.normal(size=(2, 3, 5, 2))
        out = T.matmul(Tensor(a), Tensor(b)).data
        np.testing.assert_allclose(out[1, 2], naive_matmul(a[1, 2].tolist(), b[1, 2].tolist()), rtol=1e-13)

    def test_shape_errors_name_shapes(self):
        with pytest.raises(ShapeMismatch, match=r"\(2, 3\).*\(2, 3\)"):
            T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
        with pytest.raises(ShapeMismatch):
            T.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))))
        with pytest.raises(ShapeMismatch):
            T.mse(Tensor(np.zeros(3)), np.zeros(4))

    def test_bias_broadcast_only(self):
        out = T.add(Tensor(np.zeros((2, 3))), Tensor(np.arange(3.0)))
        np.testing.assert_array_equal(out.data, [[0, 1, 2], [0, 1, 2]])

    def test_layer_norm_normalizes(self, rng):
        x = rng.normal(size=(4, 8)) * 5 + 3
        y = T.layer_norm(Tensor(x), Tensor(np.ones(8)), Tensor(np.zeros(8))).data
        np.testing.assert_allclose(y.mean(axis=1), 0, atol=1e-12)
        np.testing.assert_allclose(y.var(axis=1), 1, rtol=1e-4)

    def test_embedding_lookup(self):
        table = Tensor(np.arange(6.0).reshape(3, 2))
        np.testing.assert_array_equal(T.embedding_lookup(table, [[2, 0]]).data, [[[4, 5], [0, 1]]])

    def test_mse_and_ce_values(self):
        assert T.mse(Tensor(np.array([[0.0, 1.0]])), np.array([[1.0, 1.0]])).item() == 0.5
        logits = np.array([[1.0, 2.0, 3.0]])
        expect = -math.log(math.exp(3) / sum(math.exp(v) for v in (1, 2, 3)))
        assert T.cross_entropy(Tensor(logits), [2]).item() == pytest.approx(expect, rel=1e-14)


# -- backward ----------------------------------------------------------------------------

class TestBackward:
    def test_square(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        backward(x * x)
        assert x.grad == 6.0

    def test_not_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(NotScalarLoss):
            backward(x * 2.0)

    def test_ce_softmax_gradient(self, rng):
        logits = Tensor(rng.normal(size=(1, 5)), requires_grad=True)
        backward(T.cross_entropy(logits, [3]))
        expect = T.softmax(Tensor(logits.data)).data.copy()
        expect[0, 3] -= 1
        np.testing.assert_allclose(logits.grad, expect, rtol=1e-12)

    def test_shared_node_accumulates(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = x * 3.0
        backward(y * y + y)
        assert x.grad == pytest.approx(2 * 6 * 3 + 3)

    def test_no_grad_records_nothing(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with no_grad():
            y = T.tanh(x)
        assert not y.requires_grad

    @pytest.mark.parametrize("op", ["tanh", "sigmoid", "relu", "exp", "square", "softmax", "log_softmax",
                                    "layer_norm", "getitem", "concat", "stack", "transpose", "mean", "div",
                                    "lstm_cell", "lstm_cell_masked", "embedding", "mse", "ce", "bmm"])
    def test_op_gradients(self, op):
        for trial in range(5):
            rng = np.random.default_rng(100 + trial)
            ps = ParamSet()
            x = ps.add("x", rng.normal(size=(3, 4)))
            y = ps.add("y", rng.normal(size=(3, 4)) + 3.0)
            g = ps.add("g", rng.normal(size=4))
            w_out = rng.normal(size=(3, 4))

            def loss():
                if op == "relu":
                    return probe_loss(T.relu(x), w_out)
                if op in ("tanh", "sigmoid", "exp", "square", "softmax", "log_softmax"):
                    return probe_loss(getattr(T, op)(x), w_out)
                if op == "layer_norm":
                    return probe_loss(T.layer_norm(x, g, g * 0.5), w_out)
                if op == "getitem":
                    return T.sum_(T.mul(x[1:, ::2], Tensor(w_out[1:, ::2])))
                if op == "concat":
                    return probe_loss(T.concat([x, y], axis=1)[:, 2:6], w_out)
                if op == "stack":
                    return T.sum_(T.mul(T.stack([x, y], axis=0)[1], Tensor(w_out)))
                if op == "transpose":
                    return probe_loss(x.transpose(1, 0).reshape(3, 4), w_out)
                if op == "mean":
                    return T.sum_(T.mul(T.mean(x, axis=0), Tensor(w_out[0])))
                if op == "div":
                    return probe_loss(x / y, w_out)
                if op in ("lstm_cell", "lstm_cell_masked"):
                    zx = T.concat([x, y], axis=1)[:, :4]
                    hc = T.concat([y[:, :1], x[:, 3:]], axis=1)
                    mask = np.array([1.0, 0.0, 1.0]) if op == "lstm_cell_masked" else None
                    return T.sum_(T.mul(T.lstm_cell(zx, hc, g.reshape(1, 4), mask), Tensor(w_out[:, :2])))
                if op == "embedding":
                    return T.sum_(T.mul(T.embedding_lookup(x, [[2, 0, 2]]), Tensor(w_out[None])))
                if op == "mse":
                    return T.mse(x, y, reduction="sum")
                if op == "ce":
                    return T.cross_entropy(x * 3.0, [0, 3, 1], reduction="sum")
                if op == "bmm":
                    a = x.reshape(3, 2, 2)
                    return T.sum_(T.mul(a @ y.reshape(3, 2, 2), Tensor(w_out.reshape(3, 2, 2))))
                raise AssertionError(op)

            if op in ("lstm_cell", "lstm_cell_masked", "embedding"):
                names = ["x", "y", "g"] if "lstm" in op else ["x"]
            else:
                names = None
            err, name = check_gradients(loss, ps, rng, names=names)
            assert err < TOL, (op, trial, name, err)


# -- layers ------------------------------------------------------------------------------

def _layer_case(kind: str, seed: int):
    """A random small configuration of one layer type and its probe loss."""
    rng = np.random.default_rng(seed)
    ps = ParamSet()
    b, t = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    if kind == "linear":
        d_in, d_out = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        layer = Linear(ps, "lin", d_in, d_out, rng)
        x = rng.normal(size=(b, d_in))
        w = rng.normal(size=(b, d_out))
        return ps, lambda: probe_loss(layer(Tensor(x)), w)
    if kind == "mlp":
        sizes = [int(s) for s in rng.integers(1, 6, size=int(rng.integers(2, 5)))]
        act = str(rng.choice(["tanh", "relu", "sigmoid"]))
        layer = MLP(ps, "mlp", sizes, rng, activation=act)
        x = rng.normal(size=(b, sizes[0]))
        w = rng.normal(size=(b, sizes[-1]))
        return ps, lambda: probe_loss(layer(Tensor(x)), w)
    if kind == "embedding":
        num, dim = int(rng.integers(2, 8)), int(rng.integers(1, 5))
        layer = Embedding(ps, "emb", num, dim, rng)
        ids = rng.integers(0, num, size=(b, t))
        w = rng.normal(size=(b, t, dim))
        return ps, lambda: probe_loss(layer(ids), w)
    if kind == "layernorm":
        dim = int(rng.integers(2, 7))
        layer = LayerNorm(ps, "ln", dim)
        ps["ln.gamma"].data = rng.normal(size=dim)
        x = rng.normal(size=(b, t, dim))
        w = rng.normal(size=(b, t, dim))
        return ps, lambda: probe_loss(layer(Tensor(x)), w)
    if kind == "lstm":
        d_in, hid = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        layers, bidir = int(rng.integers(1, 3)), bool(rng.integers(0, 2))
        layer = LSTM(ps, "lstm", d_in, hid, layers, bidir, rng)
        x = rng.normal(size=(b, t, d_in))
        mask = np.ones((b, t))
        for i in range(b):
            mask[i, int(rng.integers(1, t + 1)):] = 0.0
        w_out = rng.normal(size=(b, t, hid * (2 if bidir else 1)))
        w_fin = rng.normal(size=(b, hid))

        def loss():
            out, finals = layer(Tensor(x), mask)
            total = probe_loss(out, w_out)
            for f in finals:
                total = total + probe_loss(f, w_fin)
            return total

        return ps, loss
    if kind in ("attention", "transformer"):
        heads = int(rng.choice([1, 2]))
        d = heads * int(rng.integers(1, 4))
        cls = MultiHeadAttention if kind == "attention" else TransformerEncoderLayer
        layer = cls(ps, kind, d, heads, rng=rng) if kind == "attention" else cls(ps, kind, d, heads, None, rng)
        for p in ps.values():  # non-trivial norm parameters
            p.data = p.data + 0.1 * rng.normal(size=p.shape)
        x = rng.normal(size=(b, t, d))
        mask = np.ones((b, t))
        mask[0, t - 1:] = 0.0 if t > 1 else 1.0
        w = rng.normal(size=(b, t, d))
        return ps, lambda: probe_loss(layer(Tensor(x), mask), w)
    raise AssertionError(kind)


@pytest.mark.parametrize("kind", ["linear", "mlp", "embedding", "layernorm", "lstm", "attention", "transformer"])
def test_layer_gradients_random_configs(kind):
    for seed in range(20):
        ps, loss = _layer_case(kind, seed)
        err, name = check_gradients(loss, ps, np.random.default_rng(seed), entries_per_param=4)
        assert err < TOL, (kind, seed, name, err)


class TestLayers:
    def test_lstm_length_one_is_a_cell(self, rng):
        ps = ParamSet()
        lstm = LSTM(ps, "l", 3, 4, 1, False, rng)
        x = rng.normal(size=(2, 1, 3))
        out, finals = lstm(Tensor(x))
        hc = lstm.cell(Tensor(x[:, 0]), Tensor(np.zeros((2, 8))))
        np.testing.assert_allclose(finals[0].data, hc.data[:, :4], rtol=1e-13)
        np.testing.assert_allclose(out.data[:, 0], hc.data[:, :4], rtol=1e-13)

    def test_lstm_padding_does_not_change_finals(self, rng):
        ps = ParamSet()
        lstm = LSTM(ps, "l", 2, 3, 2, True, rng)
        x = rng.normal(size=(1, 3, 2))
        padded = np.concatenate([x, rng.normal(size=(1, 2, 2))], axis=1)
        _, a = lstm(Tensor(x))
        _, b = lstm(Tensor(padded), np.array([[1, 1, 1, 0, 0.0]]))
        for fa, fb in zip(a, b):
            np.testing.assert_allclose(fa.data, fb.data, rtol=1e-13)

    def test_two_layer_bilstm_one_hot_gradcheck(self, rng):
        ps = ParamSet()
        lstm = LSTM(ps, "l", 4, 3, 2, True, rng)
        x = np.eye(4)[[0, 2, 1, 3, 2]][None]
        w = rng.normal(size=(1, 5, 6))
        err, _ = check_gradients(lambda: probe_loss(lstm(Tensor(x))[0], w), ps, rng)
        assert err < TOL

    def test_zeroed_transformer_is_layer_norm(self, rng):
        ps = ParamSet()
        layer = TransformerEncoderLayer(ps, "enc", 8, 2, None, rng)
        for name, p in ps.items():
            if ".attn." in name or ".ff." in name:
                p.data = np.zeros_like(p.data)
        x = rng.normal(size=(2, 3, 8))
        ref = T.layer_norm(Tensor(x), ps["enc.ln_out.gamma"], ps["enc.ln_out.beta"]).data
        np.testing.assert_allclose(layer(Tensor(x)).data, ref, rtol=1e-12)

    def test_attention_ignores_padded_keys(self, rng):
        ps = ParamSet()
        attn = MultiHeadAttention(ps, "a", 4, 2, rng)
        x = rng.normal(size=(1, 3, 4))
        y = x.copy()
        y[0, 2] = 100.0
        mask = np.array([[1.0, 1.0, 0.0]])
        np.testing.assert_allclose(attn(Tensor(x), mask).data[0, :2], attn(Tensor(y), mask).data[0, :2],
                                   rtol=1e-12)

    def test_init_bounds(self, rng):
        ps = ParamSet()
        Linear(ps, "l", 16, 5, rng)
        assert np.abs(ps["l.weight"].data).max() <= 0.25
        assert not ps["l.bias"].data.any()

    def test_config_errors(self, rng):
        with pytest.raises(ConfigError):
            Linear(ParamSet(), "l", 0, 3, rng)
        with pytest.raises(ConfigError):
            MultiHeadAttention(ParamSet(), "a", 6, 4, rng)
        with pytest.raises(ConfigError):
            LSTM(ParamSet(), "l", 3, -1, 1, True, rng)
        with pytest.raises(ConfigError):
            MLP(ParamSet(), "m", [3], rng)

    def test_param_order_is_construction_order(self, rng):
        a, b = ParamSet(), ParamSet()
        TransformerEncoderLayer(a, "x", 4, 2, None, np.random.default_rng(0))
        TransformerEncoderLayer(b, "x", 4, 2, None, np.random.default_rng(0))
        assert a.names() == b.names()
        np.testing.assert_array_equal(a.flat(), b.flat())


# -- optimizers and checkpoints ----------------------------------------------------------

class TestOptim:
    def _one(self, value, grad):
        ps = ParamSet()
        p = ps.add("p", np.array([value]))
        p.grad = np.array([grad])
        return ps, p

    def test_sgd(self):
        ps, p = self._one(1.0, 1.0)
        SGD(ps, lr=0.1).step()
        assert p.data[0] == pytest.approx(0.9, abs=1e-15)

    def test_adam_first_step(self):
        ps, p = self._one(1.0, 0.3)
        Adam(ps, lr=0.01).step()
        m, v = 0.1 * 0.3, 0.001 * 0.09
        expect = 1.0 - 0.01 * (m / 0.1) / (math.sqrt(v / 0.001) + 1e-8)
        assert p.data[0] == pytest.approx(expect, rel=1e-15)

    def test_zero_gradient_no_change(self):
        for kind in ("sgd", "adam"):
            ps, p = self._one(1.5, 0.0)
            make_optimizer(kind, ps, 0.1).step()
            assert p.data[0] == 1.5

    def test_missing_gradient(self):
        ps = ParamSet()
        ps.add("p", np.ones(2))
        with pytest.raises(MissingGradient):
            Adam(ps).step()

    def test_clip(self):
        ps, p = self._one(0.0, 3.0)
        assert clip_grad_norm(ps, 1.0) == 3.0
        assert p.grad[0] == pytest.approx(1.0)

    def test_deterministic_training(self):
        def run():
            rng = np.random.default_rng(5)
            ps = ParamSet()
            mlp = MLP(ps, "m", [3, 4, 2], rng)
            opt = Adam(ps, lr=0.05)
            x, w = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
            for _ in range(10):
                ps.zero_grad()
                backward(T.mse(mlp(Tensor(x)), w))
                opt.step()
            return ps.flat()

        a, b = run(), run()
        assert a.tobytes() == b.tobytes()


def test_checkpoint_roundtrip_bit_exact(tmp_path, rng):
    ps = ParamSet()
    ps.add("a", rng.normal(size=(3, 4)) * 1e-300)
    ps.add("b", np.array([math.pi, -0.0, 1e308, 5e-324]))
    save_checkpoint(tmp_path / "ck.json", ps, {"note": "x"})
    state, config = load_checkpoint(tmp_path / "ck.json")
    assert config == {"note": "x"}
    for name, t in ps.items():
        assert state[name].tobytes() == t.data.tobytes()
