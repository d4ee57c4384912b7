"""Minimal reverse-mode autodiff over numpy, plus the layers the models need."""

from numlex.tensorcore.layers import (
    LSTM,
    MLP,
    Embedding,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    TransformerEncoderLayer,
    uniform_init,
)
from numlex.tensorcore.optim import SGD, Adam, clip_grad_norm, make_optimizer
from numlex.tensorcore.params import ParamSet, load_checkpoint, read_checkpoint, save_checkpoint
from numlex.tensorcore.tensor import (
    Tensor,
    add,
    backward,
    concat,
    cross_entropy,
    embedding_lookup,
    getitem,
    grad_enabled,
    layer_norm,
    log,
    log_softmax,
    lstm_cell,
    matmul,
    mean,
    mse,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    sub,
    sum_,
    tanh,
    transpose,
)
