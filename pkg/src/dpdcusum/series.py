"""Observation sequences: the data model, file ingestion, and log returns.

Input files are delimiter-separated text (comma, tab or semicolon, detected
automatically), one observation per row, optional header row.  Non-finite
values are rejected at load time rather than dropped, since silent dropping
would shift change-point indices.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

_DELIMITERS = (",", "\t", ";")


@dataclass(frozen=True)
class Series:
    """An ordered sequence of finite real observations.

    Immutable after construction (the value buffer is marked read-only), so
    instances can be shared freely across workers.  ``timestamps`` are opaque
    per-observation labels (e.g. dates) used only for reporting.
    """

    values: np.ndarray
    label: str | None = None
    timestamps: tuple[str, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise DataError(f"series values must be one-dimensional, got shape {arr.shape}")
        if arr.size < 1:
            raise DataError("a series needs at least one observation")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise DataError(f"non-finite value at position {bad + 1}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.timestamps is not None:
            ts = tuple(str(t) for t in self.timestamps)
            if len(ts) != arr.size:
                raise DataError(
                    f"timestamp count {len(ts)} does not match observation count {arr.size}"
                )
            object.__setattr__(self, "timestamps", ts)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def slice(self, start: int, stop: int) -> "Series":
        """Sub-series of python-slice positions [start, stop)."""
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return Series(self.values[start:stop], label=self.label, timestamps=ts)


def _detect_delimiter(line: str) -> str | None:
    counts = {d: line.count(d) for d in _DELIMITERS}
    best = max(counts, key=counts.get)  # type: ignore[arg-type]
    return best if counts[best] > 0 else None


def _parse_cell(cell: str, row: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} at row {row}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {cell!r} at row {row}")
    return value


def load_series(
    path: str | os.PathLike,
    column: str | int | None = None,
    date_column: str | int | None = None,
) -> Series:
    """Load a series from a delimited text file.

    Parameters
    ----------
    path:
        File with one observation per row.
    column:
        Column to read, as a header name or 0-based index.  Defaults to the
        only column, or column 0 of a multi-column file.
    date_column:
        Optional column holding per-row labels (dates); attached as
        ``Series.timestamps``.

    Raises
    ------
    DataError
        Missing file, unknown column, empty selection, or a non-numeric cell
        (reported with its 1-based row number).
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    rows = [ln for ln in lines if ln.strip() != ""]
    if not rows:
        raise DataError(f"no data rows in {path}")

    delim = _detect_delimiter(rows[0])
    table = [[c.strip() for c in (row.split(delim) if delim else [row])] for row in rows]

    # Header detection: a first row whose candidate cell does not parse as a
    # number is treated as column names.
    header: list[str] | None = None
    probe = table[0][column] if isinstance(column, int) and column < len(table[0]) else table[0][0]
    try:
        float(probe)
    except ValueError:
        header = table[0]
        table = table[1:]
    if not table:
        raise DataError(f"no data rows in {path} after header")

    def resolve(col: str | int | None, what: str) -> int:
        if col is None:
            return 0
        if isinstance(col, int):
            if not 0 <= col < len(table[0]):
                raise DataError(f"{what} index {col} out of range (file has {len(table[0])} columns)")
            return col
        if header is None:
            raise DataError(f"{what} {col!r} requested by name but the file has no header row")
        if col not in header:
            raise DataError(f"{what} {col!r} not found in header {header}")
        return header.index(col)

    vi = resolve(column, "column")
    values = []
    stamps: list[str] | None = None
    if date_column is not None:
        stamps = []
        di = resolve(date_column, "date column")
    offset = 2 if header is not None else 1
    for r, cells in enumerate(table):
        if vi >= len(cells):
            raise DataError(f"row {r + offset} has no column {vi}")
        values.append(_parse_cell(cells[vi], r + offset))
        if stamps is not None:
            stamps.append(cells[di])
    if not values:
        raise DataError(f"empty selection from {path}")
    label = header[vi] if header is not None else None
    return Series(np.array(values), label=label, timestamps=tuple(stamps) if stamps else None)


def log_returns(prices: Series, scale: float = 100.0) -> Series:
    """Log returns ``scale * (ln p[t+1] - ln p[t])`` of a price series.

    The output has length ``n - 1``; its timestamps (when present) are those
    of the later price in each ratio, so return ``t`` carries the date the
    return was realized.
    """
    if prices.n < 2:
        raise DataError("log returns need at least two prices")
    if np.any(prices.values <= 0):
        bad = int(np.flatnonzero(prices.values <= 0)[0])
        raise DataError(f"non-positive price at position {bad + 1}")
    logs = np.log(prices.values)
    ts = prices.timestamps[1:] if prices.timestamps is not None else None
    return Series(scale * np.diff(logs), label=prices.label, timestamps=ts)
