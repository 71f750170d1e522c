"""Block calendar, zones, price/driver containers and CSV ingestion.

A delivery day is split into 96 blocks of 15 minutes; block 1 covers
00:00-00:15. All series in the package are contiguous in block time and
addressed by :class:`BlockTimestamp`.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import DataError, WindowError

BLOCKS_PER_DAY = 96

ZONES = ("N1", "N2", "N3", "E1", "E2", "A1", "A2", "W1", "W2", "W3", "S1", "S2")

Source = Union[str, bytes, os.PathLike, io.IOBase]


def days_for_years(years: float) -> int:
    """Training-window length in days for a span quoted in years."""
    return int(round(years * 365.25))


def check_zone(code: str) -> str:
    if code not in ZONES:
        raise DataError(f"unknown zone {code!r}; expected one of {', '.join(ZONES)}")
    return code


@dataclass(frozen=True, order=True)
class BlockTimestamp:
    date: date
    block: int

    def __post_init__(self):
        if isinstance(self.date, str):
            object.__setattr__(self, "date", date.fromisoformat(self.date))
        if not 1 <= int(self.block) <= BLOCKS_PER_DAY:
            raise DataError(f"block {self.block} outside 1..{BLOCKS_PER_DAY}")
        object.__setattr__(self, "block", int(self.block))

    @property
    def ordinal(self) -> int:
        """Absolute block count since the proleptic calendar origin."""
        return self.date.toordinal() * BLOCKS_PER_DAY + self.block - 1

    @classmethod
    def from_ordinal(cls, n: int) -> "BlockTimestamp":
        day, rem = divmod(int(n), BLOCKS_PER_DAY)
        return cls(date.fromordinal(day), rem + 1)

    def advance(self, k: int) -> "BlockTimestamp":
        return BlockTimestamp.from_ordinal(self.ordinal + k)

    def __sub__(self, other: "BlockTimestamp") -> int:
        return self.ordinal - other.ordinal

    def __str__(self):
        return f"{self.date.isoformat()}#{self.block}"


def day_start(d: date) -> BlockTimestamp:
    return BlockTimestamp(d, 1)


def day_end(d: date) -> BlockTimestamp:
    return BlockTimestamp(d, BLOCKS_PER_DAY)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Contiguous block series of cleared prices for one zone."""

    zone: str
    start: BlockTimestamp
    values: np.ndarray
    missing: Optional[np.ndarray] = None

    def __post_init__(self):
        check_zone(self.zone)
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DataError("price series needs at least one value")
        missing = (np.zeros(values.size, dtype=bool) if self.missing is None
                   else np.array(self.missing, dtype=bool))
        if missing.shape != values.shape:
            raise DataError("missing mask length differs from values")
        present = values[~missing]
        if not np.all(np.isfinite(present)):
            raise DataError("non-finite price")
        if np.any(present < 0):
            raise DataError("negative price")
        values[missing] = np.nan
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "missing", _frozen(missing))

    def __len__(self):
        return self.values.size

    @property
    def end(self) -> BlockTimestamp:
        return self.start.advance(len(self) - 1)

    @property
    def n_days_span(self) -> int:
        return self.end.date.toordinal() - self.start.date.toordinal() + 1

    def index_of(self, ts: BlockTimestamp) -> int:
        k = ts - self.start
        if not 0 <= k < len(self):
            raise WindowError(f"{ts} outside series {self.start}..{self.end}")
        return k

    def timestamp(self, k: int) -> BlockTimestamp:
        return self.start.advance(k)

    def value_at(self, ts: BlockTimestamp) -> float:
        """Price at ``ts``; NaN when masked."""
        return float(self.values[self.index_of(ts)])

    def has_missing(self) -> bool:
        return bool(self.missing.any())

    def slice(self, first: BlockTimestamp, last: BlockTimestamp) -> "PriceSeries":
        i, j = self.index_of(first), self.index_of(last)
        if j < i:
            raise WindowError("empty slice")
        return PriceSeries(self.zone, first, self.values[i:j + 1], self.missing[i:j + 1])

    def day(self, d: date) -> np.ndarray:
        i = self.index_of(day_start(d))
        j = self.index_of(day_end(d))
        return self.values[i:j + 1]

    def with_values(self, values: np.ndarray) -> "PriceSeries":
        return PriceSeries(self.zone, self.start, values, self.missing)

    def to_csv(self) -> str:
        """Serialize non-missing entries as ``date,block,zone,price``."""
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["date", "block", "zone", "price"])
        for k in np.flatnonzero(~self.missing):
            ts = self.timestamp(int(k))
            w.writerow([ts.date.isoformat(), ts.block, self.zone, repr(float(self.values[k]))])
        return out.getvalue()


@dataclass(frozen=True, eq=False)
class DriverMatrix:
    """Block-indexed matrix of fundamental drivers.

    Rows are stamped with the block at which the information is published;
    a day-ahead schedule for delivery day ``d`` lives in the rows of ``d - 1``.
    """

    start: BlockTimestamp
    columns: tuple
    values: np.ndarray

    def __post_init__(self):
        cols = tuple(str(c) for c in self.columns)
        if len(set(cols)) != len(cols):
            raise DataError("duplicate driver column names")
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(cols):
            raise DataError("driver values must be rows x columns")
        if not np.all(np.isfinite(values)):
            raise DataError("non-finite driver value")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self):
        return self.values.shape[0]

    @property
    def end(self) -> BlockTimestamp:
        return self.start.advance(len(self) - 1)

    def index_of(self, ts: BlockTimestamp) -> int:
        k = ts - self.start
        if not 0 <= k < len(self):
            raise WindowError(f"{ts} outside driver matrix {self.start}..{self.end}")
        return k

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise DataError(f"driver column {name!r} not present") from None

    def select(self, names: Sequence[str]) -> "DriverMatrix":
        idx = [self.columns.index(n) for n in names]
        return DriverMatrix(self.start, tuple(names), self.values[:, idx])

    def slice(self, first: BlockTimestamp, last: BlockTimestamp) -> "DriverMatrix":
        i, j = self.index_of(first), self.index_of(last)
        if j < i:
            raise WindowError("empty slice")
        return DriverMatrix(first, self.columns, self.values[i:j + 1])

    def with_values(self, values: np.ndarray) -> "DriverMatrix":
        return DriverMatrix(self.start, self.columns, values)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["date", "block", *self.columns])
        for k in range(len(self)):
            ts = self.start.advance(k)
            w.writerow([ts.date.isoformat(), ts.block, *(repr(float(v)) for v in self.values[k])])
        return out.getvalue()


@dataclass(frozen=True)
class ModelForecast:
    """Day-ahead forecast of one model: one value per block."""

    model: str
    date: date
    values: np.ndarray
    variance: Optional[np.ndarray] = field(default=None, compare=False)


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        raw = source
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DataError(f"input is not UTF-8: {exc}") from None


def _rows(source: Source, expect_prefix: Sequence[str]):
    reader = csv.reader(io.StringIO(_read_text(source)))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty CSV", line=1) from None
    if [h.lower() for h in header[:len(expect_prefix)]] != list(expect_prefix):
        raise DataError(f"header must start with {','.join(expect_prefix)}", line=1)
    rows = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(row)}", line=line)
        rows.append((line, [c.strip() for c in row]))
    if not rows:
        raise DataError("CSV has a header but no rows", line=2)
    return header, rows


def _parse_stamp(line: int, d: str, b: str) -> BlockTimestamp:
    try:
        day = date.fromisoformat(d)
    except ValueError:
        raise DataError(f"bad date {d!r}", line=line) from None
    try:
        block = int(b)
    except ValueError:
        raise DataError(f"bad block {b!r}", line=line) from None
    if not 1 <= block <= BLOCKS_PER_DAY:
        raise DataError(f"block {block} outside 1..{BLOCKS_PER_DAY}", line=line)
    return BlockTimestamp(day, block)


def _parse_float(line: int, text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric {what} {text!r}", line=line) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite {what} {text!r}", line=line)
    return v


def parse_price_csv(source: Source) -> PriceSeries:
    """Read a ``date,block,zone,price`` file into a contiguous series.

    Rows may come in any order; gaps become masked entries.
    """
    _, rows = _rows(source, ["date", "block", "zone", "price"])
    zone = None
    seen: dict[int, tuple[float, int]] = {}
    for line, (d, b, z, p) in rows:
        ts = _parse_stamp(line, d, b)
        if z not in ZONES:
            raise DataError(f"unknown zone {z!r}", line=line)
        if zone is None:
            zone = z
        elif z != zone:
            raise DataError(f"mixed zones in one file ({zone} and {z})", line=line)
        price = _parse_float(line, p, "price")
        if price < 0:
            raise DataError(f"negative price {p}", line=line)
        key = ts.ordinal
        if key in seen and seen[key][0] != price:
            raise DataError(f"duplicate {ts} with conflicting price (first at line {seen[key][1]})",
                            line=line)
        seen[key] = (price, line)
    first, last = min(seen), max(seen)
    values = np.full(last - first + 1, np.nan)
    missing = np.ones(last - first + 1, dtype=bool)
    for key, (price, _) in seen.items():
        values[key - first] = price
        missing[key - first] = False
    return PriceSeries(zone, BlockTimestamp.from_ordinal(first), values, missing)


def parse_driver_csv(source: Source) -> DriverMatrix:
    """Read a ``date,block,<columns...>`` driver file.

    Blank cells are forward-filled from the previous block of the same day;
    a blank with nothing earlier in its day is an error, as is a calendar
    day with no rows at all inside the covered range.
    """
    header, rows = _rows(source, ["date", "block"])
    columns = header[2:]
    if not columns:
        raise DataError("driver file has no value columns", line=1)
    cells: dict[int, tuple[list, int]] = {}
    for line, row in rows:
        ts = _parse_stamp(line, row[0], row[1])
        vals = [None if c == "" else _parse_float(line, c, f"value in column {columns[j]!r}")
                for j, c in enumerate(row[2:])]
        if ts.ordinal in cells:
            raise DataError(f"duplicate row for {ts}", line=line)
        cells[ts.ordinal] = (vals, line)

    first = BlockTimestamp.from_ordinal(min(cells)).date
    last = BlockTimestamp.from_ordinal(max(cells)).date
    days_present = {BlockTimestamp.from_ordinal(k).date for k in cells}
    n_days = last.toordinal() - first.toordinal() + 1
    for i in range(n_days):
        d = first + timedelta(days=i)
        if d not in days_present:
            raise DataError(f"no driver rows for {d.isoformat()} inside covered range")

    start = day_start(first)
    lo, hi = min(cells), max(cells)
    out = np.empty((hi - lo + 1, len(columns)))
    for k in range(lo, hi + 1):
        vals, line = cells.get(k, ([None] * len(columns), None))
        block = k % BLOCKS_PER_DAY + 1
        for j, v in enumerate(vals):
            if v is None:
                if block == 1 or k == lo:
                    where = f"line {line}" if line else str(BlockTimestamp.from_ordinal(k))
                    raise DataError(f"blank {columns[j]!r} at {where} with no earlier block "
                                    "in the day to fill from")
                v = out[k - lo - 1, j]
            out[k - lo, j] = v
    return DriverMatrix(BlockTimestamp.from_ordinal(lo), tuple(columns), out)


def window(series: PriceSeries, end: BlockTimestamp, length_days: int) -> PriceSeries:
    """The ``length_days * 96`` entries of ``series`` ending at ``end``."""
    if length_days < 1:
        raise WindowError("window length must be at least one day")
    first = end.advance(-length_days * BLOCKS_PER_DAY + 1)
    if first < series.start or end > series.end:
        raise WindowError(f"window {first}..{end} exits series {series.start}..{series.end}")
    return series.slice(first, end)


def driver_window(m: DriverMatrix, end: BlockTimestamp, length_days: int) -> DriverMatrix:
    if length_days < 1:
        raise WindowError("window length must be at least one day")
    first = end.advance(-length_days * BLOCKS_PER_DAY + 1)
    if first < m.start or end > m.end:
        raise WindowError(f"window {first}..{end} exits driver matrix {m.start}..{m.end}")
    return m.slice(first, end)


def lag_diff(series: PriceSeries, at: BlockTimestamp) -> float:
    """Absolute day-on-day change at a fixed block, in percent."""
    prev = at.advance(-BLOCKS_PER_DAY)
    p_now, p_prev = series.value_at(at), series.value_at(prev)
    if math.isnan(p_now) or math.isnan(p_prev):
        raise DataError(f"lag_diff needs prices at {prev} and {at}")
    if p_prev == 0:
        raise DataError(f"previous-day price at {prev} is zero")
    return abs(p_now - p_prev) / p_prev * 100.0


LAG_DIFF_BUCKETS = ("<20%", "20-40%", "40-60%", ">60%")


def lag_diff_bucket(value: float) -> str:
    if value < 20:
        return LAG_DIFF_BUCKETS[0]
    if value < 40:
        return LAG_DIFF_BUCKETS[1]
    if value < 60:
        return LAG_DIFF_BUCKETS[2]
    return LAG_DIFF_BUCKETS[3]


def iter_days(first: date, last: date) -> Iterable[date]:
    for i in range(last.toordinal() - first.toordinal() + 1):
        yield first + timedelta(days=i)
