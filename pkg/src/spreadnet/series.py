"""Monthly time-series loading, validation, alignment, and basic transforms.

Months are represented internally as integer keys (year * 12 + month - 1),
so gap and duplicate detection is exact integer arithmetic and a series is
gap-free iff its keys are consecutive integers. All values are float64.

CSV contract: header row required, one date column in YYYY-MM format plus
one or more numeric value columns, decimal point as separator, UTF-8.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateDate,
    EmptyIntersection,
    GapInDates,
    MissingColumn,
    MissingFile,
    NonPositiveValue,
    UnparseableValue,
)

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


def parse_month(text: str) -> int:
    """Parse 'YYYY-MM' into an integer month key (year * 12 + month - 1)."""
    m = _MONTH_RE.match(text.strip())
    if not m:
        raise UnparseableValue(f"date {text!r} is not in YYYY-MM format")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise UnparseableValue(f"date {text!r} has month outside 1..12")
    return year * 12 + (month - 1)


def format_month(key: int) -> str:
    """Render an integer month key back to 'YYYY-MM'."""
    year, month = divmod(int(key), 12)
    return f"{year:04d}-{month + 1:02d}"


@dataclass(frozen=True)
class MonthlySeries:
    """One named variable observed at strictly consecutive calendar months."""

    name: str
    months: np.ndarray  # int64 month keys, consecutive
    values: np.ndarray  # float64, all finite

    def __post_init__(self):
        months = np.asarray(self.months, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "months", months)
        object.__setattr__(self, "values", values)
        if months.shape != values.shape or months.ndim != 1:
            raise ValueError(
                f"series {self.name!r}: months and values must be equal-length 1-D"
            )
        if len(months) == 0:
            raise ValueError(f"series {self.name!r}: empty series")
        diffs = np.diff(months)
        if np.any(diffs == 0):
            at = int(months[np.argmin(diffs != 0)])
            raise DuplicateDate(f"series {self.name!r}: duplicate month {format_month(at)}")
        if np.any(diffs < 0):
            raise ValueError(f"series {self.name!r}: months not increasing")
        if np.any(diffs > 1):
            i = int(np.argmax(diffs > 1))
            raise GapInDates(
                f"series {self.name!r}: gap between {format_month(months[i])} "
                f"and {format_month(months[i + 1])}"
            )
        if not np.all(np.isfinite(values)):
            i = int(np.argmin(np.isfinite(values)))
            raise UnparseableValue(
                f"series {self.name!r}: non-finite value at {format_month(months[i])}"
            )
        months.setflags(write=False)
        values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.months)

    @property
    def first_month(self) -> int:
        return int(self.months[0])

    @property
    def last_month(self) -> int:
        return int(self.months[-1])

    def month_labels(self) -> list[str]:
        return [format_month(k) for k in self.months]

    def slice_months(self, start: int, stop: int) -> "MonthlySeries":
        """Restrict to month keys in [start, stop] (inclusive)."""
        mask = (self.months >= start) & (self.months <= stop)
        return MonthlySeries(self.name, self.months[mask], self.values[mask])

    def value_at(self, month: int) -> float:
        """Value at an exact month key; KeyError if absent."""
        idx = month - self.first_month
        if idx < 0 or idx >= len(self):
            raise KeyError(f"series {self.name!r} has no month {format_month(month)}")
        return float(self.values[idx])


@dataclass(frozen=True)
class AlignedFrame:
    """Several columns sharing one gap-free month axis."""

    months: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        months = np.asarray(self.months, dtype=np.int64)
        object.__setattr__(self, "months", months)
        cols = {}
        for name, col in self.columns.items():
            arr = np.asarray(col, dtype=np.float64)
            if arr.shape != months.shape:
                raise ValueError(f"column {name!r} length {len(arr)} != months {len(months)}")
            arr.setflags(write=False)
            cols[name] = arr
        object.__setattr__(self, "columns", cols)
        if len(months) and np.any(np.diff(months) != 1):
            raise GapInDates("frame months are not consecutive")
        months.setflags(write=False)

    def __len__(self) -> int:
        return len(self.months)

    def series(self, name: str) -> MonthlySeries:
        if name not in self.columns:
            raise MissingColumn(f"frame has no column {name!r}")
        return MonthlySeries(name, self.months, self.columns[name])

    def column_names(self) -> list[str]:
        return list(self.columns)


def load_series(
    path: str | Path,
    column_map: dict[str, str],
    date_column: str = "date",
) -> list[MonthlySeries]:
    """Load named monthly series from one CSV file.

    ``column_map`` maps output series names to CSV header names. Rows with
    unparseable dates or values raise, naming the offending row (1-based,
    header excluded); nothing is imputed or dropped.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if date_column not in header:
            raise MissingColumn(f"{path}: date column {date_column!r} not in header {header}")
        for name, col in column_map.items():
            if col not in header:
                raise MissingColumn(f"{path}: column {col!r} (for series {name!r}) not in header")
        months: list[int] = []
        values: dict[str, list[float]] = {name: [] for name in column_map}
        for row_no, row in enumerate(reader, start=1):
            try:
                key = parse_month(row[date_column])
            except UnparseableValue as exc:
                raise UnparseableValue(f"{path} row {row_no}: {exc}") from None
            months.append(key)
            for name, col in column_map.items():
                raw = (row[col] or "").strip()
                try:
                    val = float(raw)
                except ValueError:
                    raise UnparseableValue(
                        f"{path} row {row_no}: column {col!r} value {raw!r} is not a number"
                    ) from None
                if not math.isfinite(val):
                    raise UnparseableValue(
                        f"{path} row {row_no}: column {col!r} value {raw!r} is not finite"
                    )
                values[name].append(val)
    if not months:
        raise UnparseableValue(f"{path}: no data rows")
    month_arr = np.asarray(months, dtype=np.int64)
    _check_month_axis(month_arr, str(path))
    return [
        MonthlySeries(name, month_arr, np.asarray(values[name]))
        for name in column_map
    ]


def _check_month_axis(months: np.ndarray, origin: str) -> None:
    """Row-addressed duplicate/gap checks for a freshly loaded date column."""
    diffs = np.diff(months)
    for i in np.nonzero(diffs != 1)[0]:
        a, b = format_month(months[i]), format_month(months[i + 1])
        if diffs[i] == 0:
            raise DuplicateDate(f"{origin} row {i + 2}: month {b} repeats row {i + 1}")
        if diffs[i] < 0:
            raise GapInDates(f"{origin} row {i + 2}: month {b} precedes {a}")
        raise GapInDates(f"{origin} row {i + 2}: gap between {a} and {b}")


def align(series: list[MonthlySeries]) -> AlignedFrame:
    """Truncate all series to the intersection of their month ranges.

    Idempotent: aligning an already aligned set is the identity.
    """
    if not series:
        raise EmptyIntersection("no series to align")
    start = max(s.first_month for s in series)
    stop = min(s.last_month for s in series)
    if start > stop:
        raise EmptyIntersection(
            "series month ranges do not overlap: "
            + ", ".join(f"{s.name}[{format_month(s.first_month)}..{format_month(s.last_month)}]" for s in series)
        )
    months = np.arange(start, stop + 1, dtype=np.int64)
    columns = {}
    for s in series:
        lo = start - s.first_month
        columns[s.name] = s.values[lo : lo + len(months)]
    return AlignedFrame(months, columns)


def log_returns(s: MonthlySeries) -> MonthlySeries:
    """Month-over-month log variation ln(x_t / x_{t-1}).

    Output is one shorter than the input and dated at t (the later month).
    """
    if len(s) < 2:
        raise NonPositiveValue(f"series {s.name!r}: need at least 2 observations")
    if np.any(s.values <= 0):
        i = int(np.argmax(s.values <= 0))
        raise NonPositiveValue(
            f"series {s.name!r}: non-positive level {s.values[i]} at {format_month(s.months[i])}"
        )
    vals = np.log(s.values[1:] / s.values[:-1])
    return MonthlySeries(f"{s.name}_ret", s.months[1:], vals)


def to_basis_points(r: MonthlySeries) -> MonthlySeries:
    """Scale a return series to basis points (0.01 log return = 100 bp)."""
    return MonthlySeries(f"{r.name}_bp", r.months, r.values * 10_000.0)


def positive_component(s: MonthlySeries) -> MonthlySeries:
    """Flip the sign of fall magnitudes so losses read as positive numbers."""
    return MonthlySeries(s.name, s.months, -s.values)
