"""Result tables and run manifests with byte-stable CSV and JSON output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

CODE_VERSION = "sgfluid 0.1.0"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


@dataclass
class ResultTable:
    """Rows of named columns; floats are written with ``repr`` so they round-trip exactly."""

    columns: list
    rows: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def add(self, **values) -> None:
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"missing columns {sorted(missing)}")
        self.rows.append([values[c] for c in self.columns])

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        return cls(rows[0], [[_parse(v) for v in r] for r in rows[1:]])

    def equals(self, other: "ResultTable") -> bool:
        if self.columns != other.columns or len(self.rows) != len(other.rows):
            return False
        for a, b in zip(self.rows, other.rows):
            for x, y in zip(a, b):
                if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
                    continue
                if x != y:
                    return False
        return True


@dataclass
class RunManifest:
    """Everything needed to regenerate an experiment's outputs."""

    experiment: str
    config: dict
    seeds: dict = field(default_factory=dict)
    path_counts: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    code_version: str = CODE_VERSION

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "code_version": self.code_version, "config": self.config,
                "seeds": self.seeds, "path_counts": self.path_counts, "outputs": self.outputs,
                "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.as_dict()), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["experiment"], d["config"], d.get("seeds", {}), d.get("path_counts", {}),
                   d.get("outputs", {}), d.get("notes", {}), d.get("code_version", CODE_VERSION))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_text(path: Path, text: str) -> str:
    """Write UTF-8 text and return its SHA-256."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
