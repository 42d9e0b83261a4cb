"""CSV reports with a JSON metadata sidecar.

Floats are written with 17 significant digits, so a value read back from
the CSV is bit-identical to the one computed. Neither file carries a
timestamp or host information; identical inputs give identical bytes.
"""

import csv
import json
import math
import os

from . import __version__

FLOAT_FORMAT = ".17g"


def format_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, FLOAT_FORMAT)
    if v is None:
        return ""
    if hasattr(v, "dtype"):
        return format_cell(v.item())
    return str(v)


def _json_value(v):
    if isinstance(v, tuple):
        return [_json_value(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return format_cell(v)
    return v


def write_report(out_dir, name, columns, rows, meta):
    """Write ``<name>.csv`` and ``<name>.json`` into ``out_dir``.

    ``rows`` are dicts keyed by ``columns``; missing keys become empty
    cells. Returns the two paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    json_path = os.path.join(out_dir, f"{name}.json")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            unknown = set(row) - set(columns)
            if unknown:
                raise KeyError(f"row has undeclared columns {sorted(unknown)}")
            w.writerow([format_cell(row.get(c)) for c in columns])
    sidecar = dict(meta)
    sidecar["columns"] = list(columns)
    sidecar["rows"] = len(rows)
    sidecar["version"] = __version__
    sidecar = {k: _json_value(v) for k, v in sidecar.items()}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2, default=_json_value)
        fh.write("\n")
    return csv_path, json_path
