"""Experiment records (JSON) and flat tables (CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigurationError

RECORD_FORMAT = "lifshitz-record"
RECORD_VERSION = 1


def _encode(value):
    """JSON-safe form; non-finite floats become tagged strings so the round trip is exact."""
    if isinstance(value, float):
        if math.isnan(value):
            return {"$float": "nan"}
        if math.isinf(value):
            return {"$float": "inf" if value > 0 else "-inf"}
        return value
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _encode(value.item())
    return value


def _decode(value):
    if isinstance(value, dict):
        if set(value) == {"$float"}:
            return float(value["$float"])
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


@dataclass
class FlatTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def append(self, row) -> None:
        row = list(row)
        if len(row) != len(self.columns):
            raise ValueError(f"row of length {len(row)} for {len(self.columns)} columns")
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=",", lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([format_cell(v) for v in row])
        return buf.getvalue()


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) or (hasattr(v, "dtype") and getattr(v.dtype, "kind", "") == "f"):
        return "%.17g" % float(v)
    return str(v)


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text), delimiter=","))
    return rows[0], rows[1:]


@dataclass
class ExperimentRecord:
    kind: str
    config_hash: str
    config: dict
    version: str
    seed: int
    wall_time: float
    results: dict
    certifications: list[dict] = field(default_factory=list)
    passed: bool = True
    format: str = RECORD_FORMAT
    format_version: int = RECORD_VERSION

    def to_json(self) -> str:
        return json.dumps(_encode(asdict(self)), sort_keys=True, indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentRecord":
        data = _decode(json.loads(text))
        if data.get("format") != RECORD_FORMAT:
            raise ConfigurationError("not an experiment record")
        if data.get("format_version") != RECORD_VERSION:
            raise ConfigurationError(f"unsupported record version {data.get('format_version')}")
        return cls(**data)


def write_outputs(record: ExperimentRecord, table: FlatTable, out_dir) -> tuple[Path, Path]:
    """Write ``<kind>-<hash12>-s<seed>-<n>.json`` and ``.csv`` under ``out_dir``, never overwriting."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{record.kind}-{record.config_hash[:12]}-s{record.seed}"
    n = 0
    while True:
        rec_path, tab_path = out / f"{stem}-{n:03d}.json", out / f"{stem}-{n:03d}.csv"
        try:
            fd = os.open(rec_path, os.O_WRONLY | os.O_CREAT | os.O_EXCL)
            break
        except FileExistsError:
            n += 1
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(record.to_json())
    tab_path.write_text(table.to_csv(), encoding="utf-8")
    return rec_path, tab_path
