"""Deterministic CSV and JSON writers.

CSV: comma separated, ``.`` decimals, no thousands separators, a header row
always, preceded by one ``# `` line holding the tool version and resolved
config as JSON.  Floats use ``repr`` so values round-trip exactly.  JSON is
UTF-8 with sorted keys and never contains NaN or infinities.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__

OUT_DIR_ENV = "HARDCORE_OUT_DIR"


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-native values; reject NaN and infinities."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"refusing to serialise non-finite value {x}")
        return x
    return obj


def dumps_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dumps_json(obj)
    path.write_text(text, encoding="utf-8")
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if not math.isfinite(x):
            raise ValueError(f"refusing to write non-finite value {x}")
        return repr(x)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def metadata(config):
    return {"tool": "hardcore", "version": __version__, "config": config}


def dumps_csv(rows, columns, config=None):
    buf = io.StringIO()
    if config is not None:
        buf.write("# " + json.dumps(_plain(metadata(config)), sort_keys=True, allow_nan=False) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns, config=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_csv(rows, columns, config))
    return path


def read_csv(path):
    """Return ``(metadata or None, rows as dicts of strings)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    meta = None
    if lines and lines[0].startswith("# "):
        meta = json.loads(lines[0][2:])
        lines = lines[1:]
    return meta, list(csv.DictReader(lines))


def sidecar_path(out):
    return Path(str(out) + ".config.json")


def default_output(name):
    """``name`` inside ``$HARDCORE_OUT_DIR`` when set, else the working directory."""
    return Path(os.environ.get(OUT_DIR_ENV) or ".") / name
