"""CSV / JSON-lines serialization of experiment output.

CSV files start with ``# key = value`` metadata lines, then a header row.
Floats are written in shortest round-trip form, so reading a file back gives
bit-identical values.
"""

from __future__ import annotations

import csv
import json
import math
from typing import IO, Iterable, Mapping, Sequence

from .experiments import ExperimentRecord

RECORD_COLUMNS = ExperimentRecord.FIELDS
_INT_FIELDS = {"n_pixels", "nu", "seed"}
_FLOAT_FIELDS = {"sigma", "epsilon", "d", "value", "stderr"}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(stream: IO[str], columns: Sequence[str], rows: Iterable[Mapping], metadata: Mapping | None = None):
    for key, value in (metadata or {}).items():
        stream.write(f"# {key} = {value}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def write_jsonl(stream: IO[str], columns: Sequence[str], rows: Iterable[Mapping], metadata: Mapping | None = None):
    if metadata:
        stream.write(json.dumps({"metadata": dict(metadata)}) + "\n")
    for row in rows:
        stream.write(json.dumps({c: _json_value(row.get(c)) for c in columns}) + "\n")


def _parse(field, text):
    if text == "":
        return None
    if field in _INT_FIELDS:
        return int(text)
    if field in _FLOAT_FIELDS:
        return float(text)
    return text


def read_csv(stream: IO[str]) -> tuple[dict, list[dict]]:
    """Return ``(metadata, rows)``; record columns are converted to their types."""
    metadata = {}
    body = []
    for line in stream:
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            metadata[key.strip()] = value.strip()
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = [{k: _parse(k, v) for k, v in row.items()} for row in reader]
    return metadata, rows


def read_records(stream: IO[str]) -> tuple[dict, list[ExperimentRecord]]:
    metadata, rows = read_csv(stream)
    return metadata, [ExperimentRecord(**row) for row in rows]
