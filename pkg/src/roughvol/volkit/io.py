"""Reading and writing daily realized-variance files.

Two layouts are understood:

* ``oxford-man-csv``: first column an ISO date (``YYYY-MM-DD``, a leading
  datetime prefix or ``YYYYMMDD``), one column per ``<ASSET>.<estimator>``
  key such as ``SPX2.rv``. The later long layout with a ``Symbol`` column
  and one column per estimator is also accepted, addressed as
  ``<symbol>.<estimator>`` (e.g. ``.SPX.rv5``).
* ``generic-csv``: a ``date,value`` header.
"""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import (
    DataError,
    EmptyResultError,
    ParameterError,
    UnknownColumnError,
    UnparseableRowError,
)
from ..series import VolSeries

DATA_DIR_ENV = "ROUGHVOL_DATA_DIR"
FORMATS = ("oxford-man-csv", "generic-csv")
_MISSING = {"", "na", "nan", "null", "none", "-"}
_DATE_RE = re.compile(r"^(\d{4})-?(\d{2})-?(\d{2})")


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    format: str = "generic-csv"
    asset: str | None = None
    units: str = "var"
    start: str | None = None
    end: str | None = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ParameterError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.format == "oxford-man-csv" and not self.asset:
            raise ParameterError("oxford-man-csv needs an asset column key such as SPX2.rv")

    def resolve_path(self) -> Path:
        p = Path(self.path).expanduser()
        if not p.is_absolute() and not p.exists() and os.environ.get(DATA_DIR_ENV):
            alt = Path(os.environ[DATA_DIR_ENV]).expanduser() / p
            if alt.exists():
                return alt
        return p


def _parse_date(text: str):
    m = _DATE_RE.match(text.strip())
    if not m:
        return None
    try:
        return np.datetime64(f"{m.group(1)}-{m.group(2)}-{m.group(3)}", "D")
    except ValueError:
        return None


def _parse_value(text: str):
    """float, or None for a missing marker; raises ValueError on garbage."""
    t = text.strip()
    if t.lower() in _MISSING:
        return None
    return float(t)


def _rows(path: Path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyResultError(f"{path} is empty", path=str(path))
        return [h.strip() for h in header], [(i + 2, row) for i, row in enumerate(reader) if row]


def _extract(spec: DatasetSpec, header, rows):
    """Yield (line number, date text, value text)."""
    if spec.format == "generic-csv":
        if [h.lower() for h in header[:2]] != ["date", "value"]:
            raise UnknownColumnError(f"generic CSV needs a 'date,value' header, got {header[:2]}",
                                     header=header)
        return [(ln, r[0], r[1] if len(r) > 1 else "") for ln, r in rows]
    if "Symbol" in header:
        sym, _, est = spec.asset.rpartition(".")
        if est not in header or not sym:
            raise UnknownColumnError(f"estimator column {est!r} not found", available=header)
        si, ei = header.index("Symbol"), header.index(est)
        picked = [(ln, r[0], r[ei] if len(r) > ei else "") for ln, r in rows if len(r) > si and r[si] == sym]
        if not picked:
            raise UnknownColumnError(f"symbol {sym!r} not present in the file")
        return picked
    if spec.asset not in header:
        raise UnknownColumnError(f"column {spec.asset!r} not found",
                                 available=[h for h in header[1:] if "." in h][:50])
    ci = header.index(spec.asset)
    return [(ln, r[0], r[ci] if len(r) > ci else "") for ln, r in rows]


def ingest(spec: DatasetSpec) -> VolSeries:
    """Load one asset as a :class:`VolSeries`.

    Rows with a missing or nonpositive value are dropped and counted in
    ``meta``; rows whose date or value cannot be parsed are an error.
    Duplicate dates are an error listing the duplicates.
    """
    path = spec.resolve_path()
    header, rows = _rows(path)
    items = _extract(spec, header, rows)
    lo = _parse_date(spec.start) if spec.start else None
    hi = _parse_date(spec.end) if spec.end else None
    dates, values, bad, dropped = [], [], [], []
    for ln, dtext, vtext in items:
        d = _parse_date(dtext)
        try:
            v = _parse_value(vtext)
        except ValueError:
            v = "bad"
        if d is None or v == "bad":
            bad.append(ln)
            continue
        if (lo is not None and d < lo) or (hi is not None and d > hi):
            continue
        if v is None or not np.isfinite(v) or (spec.units != "logvar" and v <= 0):
            dropped.append(ln)
            continue
        dates.append(d)
        values.append(v)
    if bad:
        raise UnparseableRowError(f"{len(bad)} unparseable rows in {path}, first at line {bad[0]}",
                                  lines=bad[:50])
    if not values:
        raise EmptyResultError(f"no usable observations for {spec.asset or 'value'} in {path}")
    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    label = spec.asset or path.stem
    return VolSeries(dates[order], np.array(values)[order], spec.units, label,
                     {"source": str(path), "dropped": len(dropped), "dropped_lines": dropped[:50]})


def write_generic_csv(series: VolSeries, dest) -> None:
    """``date,value`` file in the series' own units, with round-trip precision."""
    lines = ["date,value"]
    lines += [f"{d},{float(v)!r}" for d, v in zip(series.dates, series.values)]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)
