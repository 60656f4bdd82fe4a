"""Deterministic CSV/JSON output with a provenance header row."""
from __future__ import annotations

import csv
import hashlib
import io
import json


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header_line(command: str, scenario: str, config: dict, seed) -> str:
    return f"# revuzlab {command} scenario={scenario} config_hash={config_hash(config)} seed={seed}\n"


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def csv_text(columns, rows, header: str = "") -> str:
    """Render rows (dicts) as CSV; floats use ``repr`` so output is byte-stable."""
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])
    return buf.getvalue()


def json_text(obj, header: dict | None = None) -> str:
    if header is not None:
        obj = {"header": header, **obj}
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
