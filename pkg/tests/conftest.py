import json
import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from numlex.numtok import BPETokenizer, WhitespaceTokenizer  # noqa: E402

SAMPLE_TEXTS = [
    "Revenue rose from 1,234.5 to 2,082 in 2019 .",
    "margin : 1.76%-2.50% | -17 | .5",
    "the total was 3.1415 and then 42 more",
    "no numbers here at all",
]


@pytest.fixture
def span_cases():
    return json.loads((HERE / "fixtures" / "span_cases.json").read_text())


@pytest.fixture(scope="session")
def ws_tok():
    return WhitespaceTokenizer.fit(SAMPLE_TEXTS)


@pytest.fixture(scope="session")
def bpe_tok():
    return BPETokenizer.fit(SAMPLE_TEXTS * 3, num_merges=40)


class CharTokenizer:
    """One piece per non-space character: a deliberately fine-grained base tokenizer."""

    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + list("0123456789%+-.,abcdefghijklmnopqrstuvwxyz")

    def __init__(self):
        self.index = {c: i for i, c in enumerate(self.vocab)}

    @property
    def vocab_size(self):
        return len(self.vocab)

    def encode(self, text):
        from numlex.numtok import Piece

        return [Piece(self.index.get(c, 1), i, i + 1) for i, c in enumerate(text) if not c.isspace()]


@pytest.fixture
def char_tok():
    return CharTokenizer()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
