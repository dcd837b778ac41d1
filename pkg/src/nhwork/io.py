"""Delimited and JSON serialization of experiment tables.

Floats are written with ``repr``, the shortest decimal that round-trips a
double, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class Table:
    columns: List[str]
    rows: List[List[Any]]
    metadata: Optional[Dict[str, Any]] = field(default=None)

    def column(self, name: str) -> List[Any]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return _cell(value.item())
    return str(value)


def _json_value(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    if table.metadata is not None:
        buf.write("# " + json.dumps(table.metadata, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(table: Table) -> str:
    """JSON document with one row per line."""
    parts = ["{"]
    if table.metadata is not None:
        parts.append(' "metadata": ' + json.dumps(table.metadata, sort_keys=True) + ",")
    parts.append(' "columns": ' + json.dumps(list(table.columns)) + ",")
    rows = [json.dumps([_json_value(v) for v in row], allow_nan=False) for row in table.rows]
    parts.append(' "rows": [' + ("\n  " + ",\n  ".join(rows) + "\n " if rows else "") + "]")
    parts.append("}")
    return "\n".join(parts) + "\n"


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_csv(text: str) -> Table:
    lines = text.splitlines()
    metadata = None
    if lines and lines[0].startswith("# "):
        metadata = json.loads(lines[0][2:])
        lines = lines[1:]
    reader = csv.reader(lines)
    columns = next(reader)
    rows = [[_parse_cell(c) for c in row] for row in reader]
    return Table(columns, rows, metadata)


def read_json(text: str) -> Table:
    doc = json.loads(text)

    def back(v):
        if v in ("inf", "-inf", "nan"):
            return float(v)
        return v

    rows = [[back(v) for v in row] for row in doc["rows"]]
    return Table(doc["columns"], rows, doc.get("metadata"))


def dumps(table: Table, fmt: str) -> str:
    return to_json(table) if fmt == "json" else to_csv(table)
