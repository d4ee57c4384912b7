"""Named parameter collections and their on-disk checkpoint format.

A checkpoint is a JSON document::

    {"format": "numlex-params", "version": 1, "config": {...},
     "params": {"name": {"shape": [..], "data": [..row-major float64..]}}}

Python's float repr is the shortest string that round-trips, so values
reload bit-exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from collections import OrderedDict
from pathlib import Path

import numpy as np

from numlex.errors import ArchMismatch, CheckpointMissing, ShapeMismatch
from numlex.tensorcore.tensor import Tensor

FORMAT = "numlex-params"
VERSION = 1


class ParamSet:
    """Ordered name -> Tensor map; iteration order is insertion order."""

    def __init__(self):
        self._params: OrderedDict[str, Tensor] = OrderedDict()

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        self._params[name] = t
        return t

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def __contains__(self, name) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def num_params(self) -> int:
        return int(sum(t.size for t in self._params.values()))

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def clear_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def freeze(self) -> None:
        """Stop gradient flow into every parameter (used for momentum teachers)."""
        for t in self._params.values():
            t.requires_grad = False
            t.grad = None

    def state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self._params.items())

    def load_state(self, state) -> None:
        if isinstance(state, ParamSet):
            state = OrderedDict((k, v.data) for k, v in state.items())
        if list(state) != list(self._params):
            missing = set(self._params) ^ set(state)
            raise ArchMismatch(f"parameter names differ: {sorted(missing)[:5]}")
        for name, arr in state.items():
            arr = np.asarray(arr, dtype=np.float64)
            t = self._params[name]
            if arr.shape != t.shape:
                raise ShapeMismatch(f"load_state[{name}]", t.shape, arr.shape)
            t.data = arr.copy()

    def flat(self) -> np.ndarray:
        return np.concatenate([t.data.reshape(-1) for t in self._params.values()]) if self._params else np.zeros(0)

    def sub(self, prefix: str) -> "ParamSet":
        """View of the parameters whose names start with ``prefix`` (same Tensor objects)."""
        out = ParamSet()
        for k, v in self._params.items():
            if k.startswith(prefix):
                out._params[k] = v
        return out


def checkpoint_dict(params: ParamSet, config: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": config or {},
        "params": {k: {"shape": list(v.shape), "data": v.data.reshape(-1).tolist()} for k, v in params.items()},
    }


def save_checkpoint(path, params: ParamSet, config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(checkpoint_dict(params, config))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointMissing(f"checkpoint {path} not found")
    doc = json.loads(path.read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    return doc


def checkpoint_state(doc: dict) -> "OrderedDict[str, np.ndarray]":
    return OrderedDict(
        (k, np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])) for k, v in doc["params"].items()
    )


def load_checkpoint(path, params: ParamSet | None = None):
    """Read a checkpoint; load it into ``params`` if given. Returns (state, config)."""
    doc = read_checkpoint(path)
    state = checkpoint_state(doc)
    if params is not None:
        params.load_state(state)
    return state, doc.get("config", {})
