"""Run manifests: what went in, what came out, and how long it took."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path


def blob_hash(data: bytes) -> str:
    """Content hash in git's blob format: sha1(b"blob <len>\\0" + data)."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def inputs_hash(config: dict, files=()) -> str:
    """One hash over the canonical config JSON and the bytes of every input file."""
    h = hashlib.sha1()
    h.update(blob_hash(json.dumps(config, sort_keys=True).encode()).encode())
    for f in sorted(str(p) for p in files):
        h.update(blob_hash(Path(f).read_bytes()).encode())
    return h.hexdigest()


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_json_atomic(path, obj, indent=2) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=indent, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": sorted(self.inputs),
            "input_hash": inputs_hash(self.config, self.inputs),
            "outputs": sorted(self.outputs),
            "tool_version": tool_version(),
            "timings": {k: round(v, 3) for k, v in self.timings.items()},
        }

    def write(self, path) -> None:
        write_json_atomic(path, self.to_dict())
