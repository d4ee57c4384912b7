"""Numeric semantics of recognized number strings."""

from __future__ import annotations

import math
from decimal import Decimal
from dataclasses import dataclass

from numlex.errors import MalformedNumber
from numlex.numtok.spans import NumberSpan, Shape, classify_shape

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class NumericValue:
    value: float
    is_percent: bool
    raw: str


@dataclass(frozen=True)
class SigExp:
    significand: float
    exponent: int

    def reconstruct(self) -> float:
        return self.significand * 10.0 ** self.exponent


@dataclass(frozen=True)
class RegressionTarget:
    log_abs: float
    sign: int

    def as_pair(self) -> tuple[float, float]:
        return (self.log_abs, float(self.sign))


def parse_value(span: NumberSpan | str) -> NumericValue:
    """Value of a number string: commas dropped, sign applied, ``%`` scales by 0.01."""
    if isinstance(span, NumberSpan):
        raw, shape = span.text, span.shape
        if classify_shape(raw) is not shape:
            raise MalformedNumber(f"{raw!r} does not match its claimed shape {shape.value}")
    else:
        raw, shape = span, classify_shape(span)
        if shape is None:
            raise MalformedNumber(f"{raw!r} is not a recognized number string")

    body = raw.replace(",", "")
    is_percent = body.endswith("%")
    if is_percent:
        body = body[:-1]
    if shape is Shape.CONVENTIONAL and body.endswith("."):
        body = body[:-1]
    value = float(body)
    if not math.isfinite(value):
        raise MalformedNumber(f"{raw!r} overflows double precision")
    if is_percent:
        value = value * 0.01
    if value == 0.0:
        value = 0.0  # drop the sign of -0
    return NumericValue(value, is_percent, raw)


def _value(v) -> float:
    return v.value if isinstance(v, NumericValue) else float(v)


def decompose(v: NumericValue | float) -> SigExp:
    """Normalized scientific decomposition of ``|v|``; zero maps to (0, 0).

    The decomposition is that of the shortest decimal string that round-trips
    to the double (its ``repr``), so ``1e-12`` gives (1.0, -12) even though the
    nearest double lies just below the power of ten.
    """
    x = abs(_value(v))
    if not math.isfinite(x):
        raise ValueError(f"cannot decompose non-finite value {x}")
    if x == 0.0:
        return SigExp(0.0, 0)
    d = Decimal(repr(x))
    e = d.adjusted()
    sig = float(d.scaleb(-e))
    # 17 significant digits can round up onto 10.0
    if sig >= 10.0:
        sig = math.nextafter(10.0, 0.0)
    return SigExp(sig, e)


def regression_target(v: NumericValue | float, eps: float = DEFAULT_EPS) -> RegressionTarget:
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = _value(v)
    sign = (x > 0) - (x < 0)
    return RegressionTarget(math.log(eps + abs(x)), sign)
