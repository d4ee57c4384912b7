"""TOML run configuration.

Every section maps onto one of the library's config dataclasses::

    seed = 0

    [numtok]   mode, base, vocab_size, min_freq, bpe_merges
    [numbed]   kind, size_tier, char_embed_dim, lstm_layers, lstm_hidden, ...
    [host]     model_dim, layers, heads, max_len, ...
    [pretrain] mode, steps, batch_size, lr, mask_rate, eps, tau, alpha_max, ...
    [probing]  task, hidden, hidden_layers, epochs, lr, ...
    [numbers]  count, e_min, e_max, integer_frac, percent_frac, ...
    [corpus]   docs, rows, cols, sentences, jitter
    [paths]    corpus, out

Unknown sections or keys are rejected. The root ``seed`` feeds every
component; per-section seeds are not accepted.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from numlex.errors import ConfigError, ParseError, ValidationError
from numlex.numbed import SIZE_TIERS, NumBedConfig
from numlex.numtok.rewrite import Mode
from numlex.pretrain.corpus import CorpusConfig
from numlex.pretrain.host import HostConfig
from numlex.pretrain.trainer import PretrainConfig
from numlex.probing.gen import NumberGenConfig
from numlex.probing.probe import ProbeConfig
from numlex.probing.tasks import TaskKind


@dataclass(frozen=True)
class NumTokConfig:
    mode: str = "addback"
    base: str = "ws"
    vocab_size: int = 2000
    min_freq: int = 1
    bpe_merges: int = 300

    def __post_init__(self):
        Mode.parse(self.mode)
        if self.base not in ("ws", "bpe"):
            raise ConfigError(f"numtok.base must be 'ws' or 'bpe', got {self.base!r}")
        if self.vocab_size < 6 or self.min_freq < 1 or self.bpe_merges < 0:
            raise ConfigError("numtok.vocab_size must be >= 6, min_freq >= 1, bpe_merges >= 0")


@dataclass(frozen=True)
class ProbingSection:
    task: str = "decode"
    list_len: int = 5
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    def __post_init__(self):
        TaskKind.parse(self.task)
        if self.list_len < 2:
            raise ConfigError("probing.list_len must be >= 2")


@dataclass(frozen=True)
class PathsConfig:
    corpus: str | None = None
    out: str = "runs"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    numtok: NumTokConfig = field(default_factory=NumTokConfig)
    numbed: NumBedConfig = field(default_factory=NumBedConfig)
    host: HostConfig = field(default_factory=HostConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    probing: ProbingSection = field(default_factory=ProbingSection)
    numbers: NumberGenConfig = field(default_factory=NumberGenConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return _apply_seed(dataclasses.replace(self, seed=int(seed)))


# per-section: dataclass, and keys owned elsewhere (the root seed)
SECTIONS = {
    "numtok": (NumTokConfig, ()),
    "numbed": (NumBedConfig, ("model_dim",)),
    "host": (HostConfig, ()),
    "pretrain": (PretrainConfig, ("seed",)),
    "probing": (ProbeConfig, ()),
    "numbers": (NumberGenConfig, ("seed",)),
    "corpus": (CorpusConfig, ("seed",)),
    "paths": (PathsConfig, ()),
}
PROBING_EXTRA = ("task", "list_len")

# documented numeric ranges, checked before the dataclasses see the values
RANGES = {
    "pretrain.tau": (0.0, 1.0), "pretrain.alpha_max": (0.0, 1.0), "pretrain.mask_rate": (0.0, 1.0),
    "pretrain.lr": (0.0, None), "pretrain.eps": (0.0, None), "pretrain.steps": (0, None),
    "pretrain.batch_size": (1, None), "pretrain.warmup_steps": (1, None),
    "numbed.eps": (0.0, None), "probing.lr": (0.0, None), "probing.train_frac": (0.0, 1.0),
    "numbers.count": (0, None), "numbers.integer_frac": (0.0, 1.0), "numbers.percent_frac": (0.0, 1.0),
    "numbers.comma_frac": (0.0, 1.0), "numbers.negative_frac": (0.0, 1.0), "corpus.jitter": (0.0, 1.0),
}


def section_keys(name: str) -> list[tuple[str, object]]:
    """(key, default) pairs accepted in one section, in declaration order."""
    cls, owned = SECTIONS[name]
    out = []
    if name == "probing":
        out += [(k, getattr(ProbingSection(), k)) for k in PROBING_EXTRA]
    for f in fields(cls):
        if f.name in owned:
            continue
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        out.append((f.name, default))
    return out


def describe_keys() -> str:
    """Human-readable listing of every config key and its default (for --help)."""
    lines = ["config keys (TOML) and defaults:", "  seed = 0"]
    for name in SECTIONS:
        lines.append(f"  [{name}]")
        for key, default in section_keys(name):
            lines.append(f"    {key} = {_render_default(default)}")
    lines.append("  numbed.model_dim always follows host.model_dim.")
    return "\n".join(lines)


def _render_default(v) -> str:
    if v is None:
        return "(unset)"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, tuple):
        return "[" + ", ".join(str(x) for x in v) + "]"
    return repr(v)


def _check_type(key: str, value, default):
    # the default's type is the schema; ints are accepted where floats are expected
    if default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValidationError(key, f"expected a boolean, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(key, f"expected an integer, got {value!r}")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(key, f"expected a number, got {value!r}")
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError(key, f"expected a string, got {value!r}")
    elif isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
            raise ValidationError(key, f"expected an array of integers, got {value!r}")
        if len(value) != len(default):
            raise ValidationError(key, f"expected {len(default)} entries, got {len(value)}")
        value = tuple(value)
    return value


def _check_range(key: str, value):
    if key not in RANGES or value is None:
        return
    lo, hi = RANGES[key]
    if value < lo or (hi is not None and value > hi):
        span = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise ValidationError(key, f"{value!r} is out of range {span}")


def _section_values(name: str, table) -> dict:
    if not isinstance(table, dict):
        raise ValidationError(name, "expected a table")
    defaults = dict(section_keys(name))
    _, owned = SECTIONS[name]
    out = {}
    for key, value in table.items():
        dotted = f"{name}.{key}"
        if key in owned:
            raise ValidationError(dotted, "not configurable here (set the root seed / host.model_dim instead)")
        if key not in defaults:
            raise ValidationError(dotted, "unknown key")
        value = _check_type(dotted, value, defaults[key])
        _check_range(dotted, value)
        out[key] = value
    return out


def _build(name: str, values: dict, seed: int, model_dim: int):
    cls, _ = SECTIONS[name]
    try:
        if name == "numbed":
            tier = values.get("size_tier", NumBedConfig().size_tier)
            if tier is not None and tier not in SIZE_TIERS:
                raise ValidationError("numbed.size_tier", f"unknown tier {tier!r}; choose from {list(SIZE_TIERS)}")
            base = dict(SIZE_TIERS[tier]) if tier is not None else {}
            return NumBedConfig(**{**base, **values, "model_dim": model_dim})
        if name == "probing":
            extra = {k: values.pop(k) for k in PROBING_EXTRA if k in values}
            return ProbingSection(probe=ProbeConfig(**values), **extra)
        if name in ("pretrain", "numbers", "corpus"):
            values = {**values, "seed": seed}
        return cls(**values)
    except ValidationError:
        raise
    except (ConfigError, ValueError) as exc:
        raise ValidationError(name, str(exc)) from None


def config_from_dict(doc: dict, check_paths: bool = True) -> RunConfig:
    doc = dict(doc)
    seed = doc.pop("seed", 0)
    seed = _check_type("seed", seed, 0)
    if seed < 0:
        raise ValidationError("seed", "must be >= 0")
    for name in doc:
        if name not in SECTIONS:
            raise ValidationError(name, "unknown section")
    values = {name: _section_values(name, doc.get(name, {})) for name in SECTIONS}
    host = _build("host", values["host"], seed, 0)
    built = {name: _build(name, values[name], seed, host.model_dim) for name in SECTIONS if name != "host"}
    cfg = RunConfig(seed=seed, host=host, **built)
    if check_paths and cfg.paths.corpus is not None and not Path(cfg.paths.corpus).exists():
        raise ValidationError("paths.corpus", f"file {cfg.paths.corpus!r} does not exist")
    return cfg


def _apply_seed(cfg: RunConfig) -> RunConfig:
    s = cfg.seed
    return dataclasses.replace(
        cfg,
        pretrain=dataclasses.replace(cfg.pretrain, seed=s),
        numbers=dataclasses.replace(cfg.numbers, seed=s),
        corpus=dataclasses.replace(cfg.corpus, seed=s),
    )


_LINE = re.compile(r"line (\d+)")


def loads_config(text: str, check_paths: bool = True) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = _LINE.search(str(exc))
            line = int(m.group(1)) if m else None
        raise ParseError(f"invalid TOML: {getattr(exc, 'msg', exc)}", line) from None
    return config_from_dict(doc, check_paths)


def load_config(path=None) -> RunConfig:
    """Validated config from a TOML file (None or an empty file gives all defaults)."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return loads_config(path.read_text())


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain TOML-ready mapping; unset optional values are omitted."""
    out = {"seed": cfg.seed}
    for name in SECTIONS:
        obj = cfg.probing.probe if name == "probing" else getattr(cfg, name)
        table = {}
        if name == "probing":
            table.update(task=cfg.probing.task, list_len=cfg.probing.list_len)
        _, owned = SECTIONS[name]
        for f in fields(obj):
            if f.name in owned:
                continue
            v = getattr(obj, f.name)
            if v is None:
                continue
            table[f.name] = list(v) if isinstance(v, tuple) else v
        out[name] = table
    return out


def dumps_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
