"""Named, index-addressable random streams derived from one root seed.

``stream(seed, "mask", batch_index)`` always yields the same generator for
the same arguments, so batch preparation can run in any order.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF, stream_key(name)] + [int(i) for i in indices]
    return np.random.default_rng(np.random.SeedSequence(entropy))
