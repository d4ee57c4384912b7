"""Synthetic serialized-table corpus for number pre-training.

Each document is a small table rendered row by row as
``label : cell | cell | ...`` followed by a couple of short sentences that
quote numbers from the table. As in real tables, the cells of one row share
a format and sit at a similar scale: each row draws one format and one
exponent, and each cell jitters that exponent by at most one. Formats are
drawn with the probing generator's frequencies.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from numlex.errors import ConfigError
from numlex.probing.gen import NumberGenConfig, render_number
from numlex.rng import stream

ROW_LABELS = [
    "revenue", "net income", "total assets", "operating cost", "cash", "tax expense", "dividends",
    "employees", "shares outstanding", "interest", "inventory", "debt", "sales", "margin", "growth",
]
COLUMN_LABELS = ["2016", "2017", "2018", "2019", "2020", "q1", "q2", "q3", "q4", "change"]
SENTENCES = [
    "the {row} was {a} in {col} compared with {b} a year earlier .",
    "{row} increased from {a} to {b} .",
    "{row} fell by {a} while {row2} reached {b} .",
    "in {col} , {row} amounted to {a} .",
    "the difference between {a} and {b} is reported under {row} .",
]


@dataclass(frozen=True)
class CorpusConfig:
    docs: int = 200
    rows: tuple[int, int] = (2, 4)
    cols: tuple[int, int] = (2, 4)
    sentences: int = 2
    jitter: float = 0.3  # chance that a cell's exponent differs from its row's by one
    seed: int = 0

    def __post_init__(self):
        if self.docs < 0 or self.sentences < 0:
            raise ConfigError("corpus docs and sentences must be >= 0")
        if not 0.0 <= self.jitter <= 1.0:
            raise ConfigError("corpus jitter must lie in [0, 1]")
        for name in ("rows", "cols"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ConfigError(f"corpus {name} range must satisfy 1 <= lo <= hi")

    def to_dict(self) -> dict:
        return asdict(self)


def serialize_row(label: str, cells) -> str:
    return f"{label} : " + " | ".join(str(c) for c in cells)


def serialize_table(header, rows) -> str:
    """Row-major serialization; the header row uses the same ``first : rest`` layout."""
    lines = [serialize_row(header[0], header[1:])] if header else []
    lines += [serialize_row(r[0], r[1:]) for r in rows]
    return " \n".join(lines)


def table_row(rng, gen_cfg: NumberGenConfig, n_cols: int, jitter: float) -> list[str]:
    draws = rng.random(4)
    is_int = draws[0] < gen_cfg.integer_frac
    comma = draws[1] < gen_cfg.comma_frac
    percent = draws[2] < gen_cfg.percent_frac
    negative = draws[3] < gen_cfg.negative_frac
    lo = max(gen_cfg.e_min, 0) if is_int else gen_cfg.e_min
    base = int(rng.integers(lo, max(gen_cfg.e_max, lo) + 1))
    out = []
    for _ in range(n_cols):
        shift = int(rng.choice([-1, 1])) if rng.random() < jitter else 0
        e = min(max(base + shift, lo), max(gen_cfg.e_max, lo))
        out.append(render_number(rng, e, is_int, comma, percent, negative))
    return out


def generate_document(rng, gen_cfg: NumberGenConfig, cfg: CorpusConfig) -> str:
    n_rows = int(rng.integers(cfg.rows[0], cfg.rows[1] + 1))
    n_cols = int(rng.integers(cfg.cols[0], cfg.cols[1] + 1))
    row_labels = [ROW_LABELS[i] for i in rng.choice(len(ROW_LABELS), size=n_rows, replace=False)]
    col_labels = [COLUMN_LABELS[i] for i in rng.choice(len(COLUMN_LABELS), size=n_cols, replace=False)]
    rows = [[label] + table_row(rng, gen_cfg, n_cols, cfg.jitter) for label in row_labels]
    cells = [c for r in rows for c in r[1:]]
    parts = [serialize_table(["item"] + col_labels, rows)]
    for _ in range(cfg.sentences):
        template = SENTENCES[int(rng.integers(len(SENTENCES)))]
        a, b = (cells[int(i)] for i in rng.integers(0, len(cells), size=2))
        parts.append(template.format(
            row=row_labels[int(rng.integers(n_rows))], row2=row_labels[int(rng.integers(n_rows))],
            col=col_labels[int(rng.integers(n_cols))], a=a, b=b,
        ))
    return " \n".join(parts)


def generate_corpus(cfg: CorpusConfig = CorpusConfig(), gen_cfg: NumberGenConfig | None = None) -> list[str]:
    """``cfg.docs`` documents; document i depends only on (seed, i)."""
    gen_cfg = gen_cfg or NumberGenConfig()
    return [generate_document(stream(cfg.seed, "corpus", i), gen_cfg, cfg) for i in range(cfg.docs)]
