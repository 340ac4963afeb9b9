"""Report serialisation shared by the pipeline and the CLI.

JSON floats use Python's shortest round-trip repr, CSV floats 17 significant
digits; both parse back to the same doubles.  Non-finite floats become the
strings ``"inf"``, ``"-inf"`` and ``"nan"`` so the JSON stays standard.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .measurement import format_float

__all__ = ["jsonable", "to_json", "flatten", "to_csv", "write_report"]


def jsonable(obj):
    """Plain JSON-compatible copy of ``obj`` (dicts, lists, numpy scalars and arrays)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def to_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def flatten(obj, prefix: str = "") -> list:
    """``(dotted key, value)`` pairs in sorted key order; list entries get an index."""
    out = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            out.extend(flatten(obj[k], f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            out.extend(flatten(v, f"{prefix}[{i}]"))
    else:
        out.append((prefix, obj))
    return out


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    s = str(v)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def to_csv(obj) -> str:
    """Two-column ``key,value`` CSV of a nested report."""
    rows = ["key,value"] + [f"{k},{_cell(v)}" for k, v in flatten(jsonable_keep_floats(obj))]
    return "\n".join(rows) + "\n"


def jsonable_keep_floats(obj):
    """Like :func:`jsonable` but non-finite floats stay floats (for CSV)."""
    if isinstance(obj, dict):
        return {str(k): jsonable_keep_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable_keep_floats(v) for v in (obj.tolist() if isinstance(obj, np.ndarray) else obj)]
    return obj


def write_report(obj, path, fmt: str = "json") -> None:
    text = to_json(obj) if fmt == "json" else to_csv(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
