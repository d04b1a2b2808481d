"""CSV output: 17 significant digits, comma delimiter, LF line endings."""
from __future__ import annotations

import csv
import io
import numbers
from pathlib import Path

from .spectra import atomic_write_text


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return "%.17g" % float(v)
    return str(v)


def csv_text(meta: dict, columns: list[str], rows) -> str:
    """A '# key=value' line naming the case and parameters, a column line, then data."""
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, meta: dict, columns: list[str], rows) -> str:
    text = csv_text(meta, columns, rows)
    atomic_write_text(Path(path), text)
    return text


def read_csv(path):
    """(meta, columns, rows as strings) for a file written by write_csv."""
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    reader = csv.reader(lines[1:])
    columns = next(reader)
    return meta, columns, list(reader)
