"""Ordered batches of scenario losses with a lazily sorted view.

Positive values are losses. The CSV format is a single `loss` column with a
required header; floats are written with round-trip-exact formatting so a
write/read cycle reproduces the sample bit for bit.
"""
from __future__ import annotations

import csv
import io

import numpy as np

from .errors import ParameterError, UsageError
from .serialize import format_float


class SampleSet:
    """Immutable batch of finite losses; sorting happens once, on demand."""

    __slots__ = ("values", "_sorted")

    def __init__(self, values):
        arr = np.asarray(values, dtype=float).ravel()
        if arr.size == 0:
            raise ParameterError("sample must be nonempty")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("sample values must all be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "_sorted", None)

    def __setattr__(self, name, value):
        raise AttributeError("SampleSet is immutable")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def sorted_view(self) -> np.ndarray:
        if self._sorted is None:
            s = np.sort(self.values)
            s.setflags(write=False)
            object.__setattr__(self, "_sorted", s)
        return self._sorted


def write_sample_csv(s: SampleSet, path_or_buf) -> None:
    """Write the single-column `loss` CSV (header required by the dialect)."""
    if hasattr(path_or_buf, "write"):
        _write_sample(s, path_or_buf)
    else:
        with open(path_or_buf, "w", newline="", encoding="utf-8") as fh:
            _write_sample(s, fh)


def _write_sample(s: SampleSet, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["loss"])
    for v in s.values:
        w.writerow([format_float(v)])


def read_sample_csv(path_or_buf) -> SampleSet:
    """Read the single-column `loss` CSV written by write_sample_csv."""
    if hasattr(path_or_buf, "read"):
        return _read_sample(path_or_buf)
    with open(path_or_buf, "r", newline="", encoding="utf-8") as fh:
        return _read_sample(fh)


def _read_sample(fh) -> SampleSet:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise UsageError("sample CSV is empty; expected a `loss` header row") from None
    if [h.strip() for h in header] != ["loss"]:
        raise UsageError(f"sample CSV must have a single `loss` column, got header {header!r}")
    vals = []
    for row in reader:
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        if len(row) != 1:
            raise UsageError(f"sample CSV row has {len(row)} fields, expected 1: {row!r}")
        try:
            vals.append(float(row[0]))
        except ValueError as exc:
            raise UsageError(f"bad numeric literal in sample CSV: {row[0]!r}") from exc
    if not vals:
        raise UsageError("sample CSV has a header but no rows")
    return SampleSet(vals)


def read_matrix_csv(path_or_buf) -> tuple[list[str], np.ndarray]:
    """Read a headered numeric CSV into (column names, rows matrix)."""
    if hasattr(path_or_buf, "read"):
        fh = path_or_buf
        return _read_matrix(fh)
    with open(path_or_buf, "r", newline="", encoding="utf-8") as fh:
        return _read_matrix(fh)


def _read_matrix(fh) -> tuple[list[str], np.ndarray]:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise UsageError("CSV is empty; expected a header row") from None
    if not header or any(not h for h in header):
        raise UsageError(f"CSV header has empty column names: {header!r}")
    rows = []
    for row in reader:
        if not row or all(f.strip() == "" for f in row):
            continue
        if len(row) != len(header):
            raise UsageError(
                f"CSV row has {len(row)} fields, expected {len(header)}: {row!r}")
        try:
            rows.append([float(f) for f in row])
        except ValueError as exc:
            raise UsageError(f"bad numeric literal in CSV row {row!r}") from exc
    if not rows:
        raise UsageError("CSV has a header but no data rows")
    return header, np.asarray(rows, dtype=float)


def sample_csv_text(s: SampleSet) -> str:
    buf = io.StringIO()
    write_sample_csv(s, buf)
    return buf.getvalue()
