from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from numlex.errors import ConfigError, DegenerateTask
from numlex.numeric import SigExp, decompose, parse_value


class TaskKind(str, enum.Enum):
    DECODING = "decode"
    ADDITION = "add"
    SUBTRACTION = "sub"
    LIST_MAX = "listmax"

    @classmethod
    def parse(cls, value) -> "TaskKind":
        if isinstance(value, cls):
            return value
        aliases = {"decoding": "decode", "addition": "add", "subtraction": "sub", "list_max": "listmax"}
        value = str(value).lower()
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class ProbeTask:
    kind: TaskKind
    inputs: tuple[str, ...]
    gold: SigExp | int

    def to_dict(self) -> dict:
        if isinstance(self.gold, SigExp):
            gold = {"significand": self.gold.significand, "exponent": self.gold.exponent}
        else:
            gold = {"index": int(self.gold)}
        return {"task": self.kind.value, "inputs": list(self.inputs), "gold": gold}

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeTask":
        g = d["gold"]
        gold = int(g["index"]) if "index" in g else SigExp(float(g["significand"]), int(g["exponent"]))
        return cls(TaskKind.parse(d["task"]), tuple(d["inputs"]), gold)


def make_task(kind, numbers, rng, count: int | None = None, list_len: int = 5) -> list[ProbeTask]:
    """Probe tasks over a pool of number strings.

    Decoding uses every number once. The pairwise and list tasks draw
    ``count`` (default: pool size) random combinations from the pool.
    """
    kind = TaskKind.parse(kind)
    numbers = list(numbers)
    if not numbers:
        raise ConfigError("make_task needs a non-empty number pool")
    values = [parse_value(s).value for s in numbers]

    if kind is TaskKind.DECODING:
        return [ProbeTask(kind, (s,), decompose(v)) for s, v in zip(numbers, values)]

    count = len(numbers) if count is None else count
    tasks = []
    if kind in (TaskKind.ADDITION, TaskKind.SUBTRACTION):
        idx = rng.integers(0, len(numbers), size=(count, 2))
        for a, b in idx:
            v = values[a] + values[b] if kind is TaskKind.ADDITION else values[a] - values[b]
            tasks.append(ProbeTask(kind, (numbers[a], numbers[b]), decompose(v)))
        return tasks

    if list_len < 2:
        raise ConfigError("list_len must be >= 2")
    if len(numbers) < list_len:
        raise ConfigError(f"pool of {len(numbers)} numbers is smaller than list_len {list_len}")
    for _ in range(count):
        for _attempt in range(100):
            pick = rng.choice(len(numbers), size=list_len, replace=False)
            vals = np.array([values[i] for i in pick])
            top = vals.max()
            if (vals == top).sum() == 1:
                break
        else:
            raise DegenerateTask("could not draw a list with a unique maximum in 100 attempts")
        tasks.append(ProbeTask(kind, tuple(numbers[i] for i in pick), int(vals.argmax())))
    return tasks


def write_tasks(path, tasks) -> None:
    with open(path, "w") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_dict()) + "\n")


def read_tasks(path) -> list[ProbeTask]:
    with open(path) as fh:
        return [ProbeTask.from_dict(json.loads(line)) for line in fh if line.strip()]
