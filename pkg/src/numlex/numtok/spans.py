"""Number recognition: find number strings inside free text.

Recognition runs in three stages. FILTER cuts the source into maximal runs
of number characters. SPLIT walks each run left to right and, at every
position, takes the longest match among the three number shapes
(thousands-separated first, then conventional, then dot-started decimal);
characters that start no match become separators. CHECK re-validates each
candidate against its shape regex.

Disambiguation rules applied during SPLIT:

* a span that starts with ``+``, ``-`` or ``.`` may not directly follow
  another span, so ``1.76%-2.50%`` yields two positive percentages;
* a ``.`` must be followed by a digit to belong to a span
  (``grew by 5.`` yields ``5``);
* a comma group must be exactly three digits, so ``1,2345`` yields
  ``1`` and ``2345``.

Offsets are Python string indices; ``source[span.start:span.end] == span.text``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

DIGITS = "0123456789"
DEFAULT_CHARSET = frozenset(DIGITS + "%+-.,")
SIGN_OR_DOT = frozenset("+-.")


class Shape(str, enum.Enum):
    CONVENTIONAL = "Conventional"
    THOUSANDS_SEPARATED = "ThousandsSeparated"
    DOT_STARTED_DECIMAL = "DotStartedDecimal"


# The reference patterns, verbatim.
SHAPE_PATTERNS = {
    Shape.CONVENTIONAL: re.compile(r"[+-]?\d+(?:\.\d*)?%?"),
    Shape.THOUSANDS_SEPARATED: re.compile(r"[+-]?\d{1,3}(?:,\d{3})*(?:\.\d+)?%?"),
    Shape.DOT_STARTED_DECIMAL: re.compile(r"[+-]?\.\d+%?"),
}

# Scanning variants: restrictions of the reference patterns that encode the
# disambiguation rules. A scanner match always fully matches its reference
# pattern. Order is precedence order.
_SCANNERS = (
    (Shape.THOUSANDS_SEPARATED, re.compile(r"[+-]?\d{1,3}(?:,\d{3}(?!\d))+(?:\.\d+)?%?")),
    (Shape.CONVENTIONAL, re.compile(r"[+-]?\d+(?:\.\d+)?%?")),
    (Shape.DOT_STARTED_DECIMAL, re.compile(r"[+-]?\.\d+%?")),
)


@dataclass(frozen=True)
class NumberSpan:
    text: str
    start: int
    end: int
    shape: Shape

    def to_dict(self) -> dict:
        return {"text": self.text, "start": self.start, "end": self.end, "shape": self.shape.value}


def classify_shape(text: str) -> Shape | None:
    """Return the shape ``text`` fully matches, or None.

    A string matching the thousands pattern without any comma is also a
    conventional number and is classified as such.
    """
    if "," in text:
        if SHAPE_PATTERNS[Shape.THOUSANDS_SEPARATED].fullmatch(text):
            return Shape.THOUSANDS_SEPARATED
        return None
    for shape in (Shape.CONVENTIONAL, Shape.DOT_STARTED_DECIMAL):
        if SHAPE_PATTERNS[shape].fullmatch(text):
            return shape
    return None


def _check(text: str, shape: Shape) -> bool:
    return bool(SHAPE_PATTERNS[shape].fullmatch(text)) and any(c in DIGITS for c in text)


def filter_runs(source: str, charset=DEFAULT_CHARSET) -> list[tuple[int, int]]:
    """FILTER stage: (start, end) of every maximal run of charset characters."""
    runs = []
    i, n = 0, len(source)
    while i < n:
        if source[i] in charset:
            j = i + 1
            while j < n and source[j] in charset:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    return runs


def filter_split_check(candidate: str, offset: int = 0) -> list[NumberSpan]:
    """SPLIT and CHECK one run of number characters.

    ``offset`` is added to the returned span positions so callers can
    report positions in the enclosing source.
    """
    spans: list[NumberSpan] = []
    i, n = 0, len(candidate)
    last_end = -1
    while i < n:
        best = None
        for shape, scanner in _SCANNERS:
            m = scanner.match(candidate, i)
            if m is None:
                continue
            if candidate[i] in SIGN_OR_DOT and last_end == i:
                continue
            if best is None or m.end() > best[1]:
                best = (shape, m.end())
        if best is None:
            i += 1
            continue
        shape, end = best
        text = candidate[i:end]
        if not _check(text, shape):
            i += 1
            continue
        spans.append(NumberSpan(text, offset + i, offset + end, shape))
        last_end = end
        i = end
    return spans


def recognize_numbers(source: str, charset=DEFAULT_CHARSET) -> list[NumberSpan]:
    """All number spans in ``source``, sorted and non-overlapping."""
    spans: list[NumberSpan] = []
    for start, end in filter_runs(source, charset):
        spans.extend(filter_split_check(source[start:end], offset=start))
    return spans
