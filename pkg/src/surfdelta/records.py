"""Keyed-text records and CSV tables shared by every result type."""
import csv
import hashlib
import io
import json

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "none"
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=float)
    return str(v)


def to_keyed_text(record, header=()):
    """``key = value`` lines; arrays should be dropped or summarised by the caller."""
    lines = [f"# {h}" for h in header]
    lines += [f"{k} = {_fmt(v)}" for k, v in record.items()]
    return "\n".join(lines) + "\n"


def _parse(v):
    if v == "true":
        return True
    if v == "false":
        return False
    if v == "none":
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        pass
    try:
        return json.loads(v)
    except ValueError:
        return v


def from_keyed_text(text):
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        out[key.strip()] = _parse(val.strip())
    return out


def to_csv(rows, columns, header=()):
    buf = io.StringIO()
    for h in header:
        buf.write(f"# {h}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def config_hash(obj):
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
