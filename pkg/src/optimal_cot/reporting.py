"""Table output, atomic file writes and run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__


def format_value(v) -> str:
    """Decimal text with 12 significant digits for floats."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    return str(v)


def to_csv(rows: Iterable[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def _json_default(v):
    if hasattr(v, "item"):
        return v.item()
    if hasattr(v, "tolist"):
        return v.tolist()
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def _clean(v):
    # JSON has no NaN; emit null instead
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False, default=_json_default) + "\n"


def atomic_write(path: str | os.PathLike, data: str | bytes) -> Path:
    """Write via a temp file in the target directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int
    outputs: list[str] = field(default_factory=list)
    tool_version: str = __version__

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "outputs": self.outputs,
            "tool_version": self.tool_version,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RunManifest":
        return cls(
            command=d["command"],
            parameters=dict(d["parameters"]),
            seed=int(d["seed"]),
            outputs=list(d.get("outputs", [])),
            tool_version=d.get("tool_version", __version__),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def manifest_path(out: str | os.PathLike) -> Path:
    return Path(f"{out}.manifest.json")


def write_manifest(manifest: RunManifest, out: str | os.PathLike) -> Path:
    return atomic_write(manifest_path(out), json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
