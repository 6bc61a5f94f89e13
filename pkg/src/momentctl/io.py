"""Artifact writers: deterministic CSV and JSON with provenance."""

import csv
import json
import math
import os

import numpy as np

__all__ = ["fmt", "write_csv", "write_json", "read_csv", "jsonable"]


def fmt(x):
    """Shortest round-trip text for numbers; plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if x is None:
        return ""
    return str(x)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_csv(path, header, rows, config_hash):
    """CSV with ``,`` separator, ``.`` decimals, LF endings and a hash comment line."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def write_json(path, payload, config_hash, provenance=None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {"config_hash": config_hash, "provenance": jsonable(provenance or {}),
           **jsonable(payload)}
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_csv(path):
    """Return ``(config_hash, header, rows)`` from a file written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        h = first.split("=", 1)[1] if first.startswith("# config_hash=") else None
        rows = list(csv.reader(fh))
    return h, rows[0], rows[1:]
