"""Synthetic number strings with table-like format statistics.

Defaults follow the format mix observed in real table corpora: 91% integers,
1.51% percentages, 5.02% with thousands separators, 0.12% negative.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from numlex.errors import ConfigError


@dataclass(frozen=True)
class NumberGenConfig:
    count: int = 10_000
    e_min: int = -2
    e_max: int = 6
    integer_frac: float = 0.91
    percent_frac: float = 0.0151
    comma_frac: float = 0.0502
    negative_frac: float = 0.0012
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if self.e_min > self.e_max:
            raise ConfigError("e_min must not exceed e_max")
        for name in ("integer_frac", "percent_frac", "comma_frac", "negative_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return asdict(self)


def _group_thousands(int_part: str) -> str:
    head = len(int_part) % 3 or 3
    groups = [int_part[:head]] + [int_part[i:i + 3] for i in range(head, len(int_part), 3)]
    return ",".join(groups)


def _digits(rng, n: int, leading_nonzero: bool) -> str:
    out = [str(rng.integers(1, 10))] if leading_nonzero else [str(rng.integers(0, 10))]
    out += [str(d) for d in rng.integers(0, 10, size=n - 1)]
    return "".join(out)


def render_number(rng, exponent: int, is_int: bool, comma: bool, percent: bool, negative: bool) -> str:
    """One number string whose leading digit sits at 10**exponent."""
    if is_int:
        exponent = max(exponent, 0)
    if comma:
        exponent = max(exponent, 3)
    if is_int:
        body = _digits(rng, exponent + 1, True)
        text = _group_thousands(body) if comma else body
    else:
        places = int(rng.integers(1, 4))
        if exponent >= 0:
            digits = _digits(rng, exponent + 1 + places, True)
            int_part, frac = digits[:exponent + 1], digits[exponent + 1:]
        else:
            frac = "0" * (-exponent - 1) + _digits(rng, places, True)
            int_part = "0"
        text = f"{_group_thousands(int_part) if comma else int_part}.{frac}"
    if percent:
        text += "%"
    if negative:
        text = "-" + text
    return text


def generate_numbers(cfg: NumberGenConfig, rng=None) -> list[str]:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    out = []
    for _ in range(cfg.count):
        draws = rng.random(4)
        is_int = draws[0] < cfg.integer_frac
        comma = draws[1] < cfg.comma_frac
        percent = draws[2] < cfg.percent_frac
        negative = draws[3] < cfg.negative_frac
        lo = max(cfg.e_min, 0) if is_int else cfg.e_min
        hi = max(cfg.e_max, lo)
        exponent = int(rng.integers(lo, hi + 1))
        out.append(render_number(rng, exponent, is_int, comma, percent, negative))
    return out
