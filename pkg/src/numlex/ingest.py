"""Read pre-training documents from JSONL, CSV or plain-text files.

* ``.jsonl`` / ``.json``: one ``{"text": ...}`` object per non-blank line.
* ``.csv``: one table per file, serialized row-major as ``first : rest | ...``.
* anything else: plain text, one document per blank-line-separated block.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from numlex.errors import MalformedRecord
from numlex.numtok.spans import recognize_numbers
from numlex.pretrain.corpus import serialize_table

log = logging.getLogger(__name__)


@dataclass
class CorpusStats:
    documents: int = 0
    characters: int = 0
    numbers: int = 0


@dataclass
class Corpus:
    documents: list[str] = field(default_factory=list)
    stats: CorpusStats = field(default_factory=CorpusStats)

    def __iter__(self):
        return iter(self.documents)

    def __len__(self):
        return len(self.documents)


def _jsonl(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict) or not isinstance(rec.get("text"), str):
            raise MalformedRecord(lineno, 'expected an object with a string "text" field')
        yield rec["text"]


def _csv(text: str):
    rows = []
    try:
        for row in csv.reader(io.StringIO(text)):
            if any(c.strip() for c in row):
                rows.append([c.strip() for c in row])
    except csv.Error as exc:
        raise MalformedRecord(len(rows) + 1, f"invalid CSV ({exc})") from None
    if not rows:
        return
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise MalformedRecord(i, f"expected {width} cells, found {len(row)}")
    yield serialize_table(rows[0], rows[1:])


def _blocks(text: str):
    block = []
    for line in text.splitlines():
        if line.strip():
            block.append(line.strip())
        elif block:
            yield " ".join(block)
            block = []
    if block:
        yield " ".join(block)


def iter_documents(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".json"):
        yield from _jsonl(text)
    elif suffix == ".csv":
        yield from _csv(text)
    else:
        yield from _blocks(text)


def ingest_corpus(path) -> Corpus:
    """All documents of a file in file order, with character and number counts."""
    corpus = Corpus()
    for doc in iter_documents(path):
        corpus.documents.append(doc)
        corpus.stats.characters += len(doc)
        corpus.stats.numbers += len(recognize_numbers(doc))
    corpus.stats.documents = len(corpus.documents)
    log.info("ingested %s: %d documents, %d characters, %d numbers", path, corpus.stats.documents,
             corpus.stats.characters, corpus.stats.numbers)
    return corpus
