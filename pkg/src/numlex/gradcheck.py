"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from numlex.tensorcore.params import ParamSet
from numlex.tensorcore.tensor import backward


def relative_error(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def check_gradients(loss_fn, params: ParamSet, rng=None, h=1e-4, entries_per_param=6, names=None):
    """Compare analytic gradients of ``loss_fn()`` with central differences.

    ``loss_fn`` must rebuild the graph from the current parameter values on
    every call. A random sample of ``entries_per_param`` entries is probed in
    each parameter. Returns the worst relative error and the offending name.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    params.zero_grad()
    backward(loss_fn())
    worst, worst_name = 0.0, None
    for name in names or params.names():
        p = params[name]
        flat = p.data.reshape(-1)
        picks = rng.choice(flat.size, size=min(entries_per_param, flat.size), replace=False)
        analytic = p.grad.reshape(-1)[picks]
        numeric = np.empty(len(picks))
        for j, idx in enumerate(picks):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn().item()
            flat[idx] = orig - h
            down = loss_fn().item()
            flat[idx] = orig
            numeric[j] = (up - down) / (2 * h)
        err = float(relative_error(analytic, numeric).max())
        if err > worst:
            worst, worst_name = err, name
    return worst, worst_name
