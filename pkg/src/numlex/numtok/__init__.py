"""Number recognition and number-aware token streams."""

from numlex.numtok.base import (
    BPETokenizer,
    Piece,
    WhitespaceTokenizer,
    check_tiling,
    load_tokenizer,
    save_tokenizer,
)
from numlex.numtok.rewrite import Kind, Mode, Token, TokenSequence, tokenize
from numlex.numtok.spans import (
    DEFAULT_CHARSET,
    SHAPE_PATTERNS,
    NumberSpan,
    Shape,
    classify_shape,
    filter_runs,
    filter_split_check,
    recognize_numbers,
)
