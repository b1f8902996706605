"""Deterministic JSON / CSV output.

Floats are written with 17 significant digits so that a report round-trips
bit-exactly and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, is_dataclass

import numpy as np

SCHEMA_VERSION = 1


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_str(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    return _str(str(obj))


def _str(s):
    import json
    return json.dumps(s, ensure_ascii=True)


def dumps(obj, indent=2):
    """JSON text with sorted keys and 17-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def csv_text(rows, columns):
    """CSV with a fixed column order; floats use 17 significant digits."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row.get(c, "")
            if isinstance(v, (float, np.floating)):
                v = fmt_float(v).strip('"')
            out.append(v)
        wr.writerow(out)
    return buf.getvalue()
