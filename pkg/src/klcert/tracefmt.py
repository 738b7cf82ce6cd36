"""One CSV schema for method traces and worst-case majorant traces.

RFC 4180 lines (CRLF, '.' decimal separator), 17 significant digits so that
round-tripping and byte-for-byte reproducibility hold.  Both kinds of trace
share the columns, which makes overlay plotting trivial; writers leave the
columns they do not know empty.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from typing import Optional

TRACE_COLUMNS = (
    "k",
    "value_gap",
    "value_bound",
    "step_norm",
    "witness_norm",
    "distance_to_xstar",
    "distance_bound",
)


def format_float(v: Optional[float]) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf"
    return f"{v:.17g}"


def write_trace(path, rows) -> None:
    """rows: iterable of dicts keyed by TRACE_COLUMNS (missing -> empty).

    Written atomically so partial files never appear under the target name.
    """
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(TRACE_COLUMNS)
            for row in rows:
                out = []
                for col in TRACE_COLUMNS:
                    v = row.get(col)
                    if col == "k":
                        out.append(str(int(v)))
                    else:
                        out.append(format_float(v))
                writer.writerow(out)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, fieldnames, rows) -> None:
    """Generic RFC-4180 table with the same float formatting as traces.

    Integer-valued cells are written without a decimal point; None becomes
    an empty cell.  Atomic like write_trace.
    """
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(fieldnames)
            for row in rows:
                out = []
                for col in fieldnames:
                    v = row.get(col)
                    if v is None:
                        out.append("")
                    elif isinstance(v, bool):
                        out.append(str(int(v)))
                    elif isinstance(v, int):
                        out.append(str(v))
                    else:
                        out.append(format_float(float(v)))
                writer.writerow(out)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trace(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            row = {}
            for col in TRACE_COLUMNS:
                raw = rec.get(col, "")
                if raw == "" or raw is None:
                    row[col] = None
                elif col == "k":
                    row[col] = int(raw)
                elif raw == "inf":
                    row[col] = math.inf
                else:
                    row[col] = float(raw)
            rows.append(row)
    return rows
