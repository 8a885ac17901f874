"""Generation, capacity and plant-registry ingestion.

All timestamps are UTC.  The hourly axis is represented with numpy
``datetime64[h]`` values; the daily capacity axis with ``datetime64[D]``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyRegistry,
    MalformedRow,
    MissingCapacityDate,
    NegativeValue,
    NonContiguousAxis,
    NonContiguousDates,
    ZeroCapacity,
)

GENERATION_HEADER = ["timestamp", "generation_mwh"]
CAPACITY_HEADER = ["date", "capacity_mw"]
PLANTS_HEADER = ["lon", "lat", "capacity_mw"]
CF_HEADER = ["timestamp", "cf"]

_HOUR_RE = re.compile(r"^(\d{4}-\d{2}-\d{2})T(\d{2}):00(?::00)?(?:Z|\+00:00)$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_ONE_HOUR = np.timedelta64(1, "h")


def parse_hour(text):
    """Parse ``YYYY-MM-DDTHH:00Z`` into ``datetime64[h]``; ValueError otherwise."""
    m = _HOUR_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not a whole-hour UTC timestamp: {text!r}")
    return np.datetime64(f"{m.group(1)}T{m.group(2)}", "h")


def format_hour(t):
    return f"{np.datetime_as_string(np.datetime64(t, 'h'), unit='h')}:00Z"


def parse_date(text):
    text = text.strip()
    if not _DATE_RE.match(text):
        raise ValueError(f"not a YYYY-MM-DD date: {text!r}")
    return np.datetime64(text, "D")


@dataclass(frozen=True)
class TimeAxis:
    """Contiguous hourly UTC axis of ``n_hours`` steps starting at ``start``."""

    start: np.datetime64
    n_hours: int

    def __post_init__(self):
        object.__setattr__(self, "start", np.datetime64(self.start, "h"))
        if int(self.n_hours) < 0:
            raise ValueError("n_hours must be non-negative")
        object.__setattr__(self, "n_hours", int(self.n_hours))

    @classmethod
    def from_years(cls, first_year, last_year):
        start = np.datetime64(f"{int(first_year):04d}-01-01T00", "h")
        stop = np.datetime64(f"{int(last_year) + 1:04d}-01-01T00", "h")
        return cls(start, int((stop - start) / _ONE_HOUR))

    @property
    def end(self):
        """Last timestamp on the axis (inclusive)."""
        return self.start + (self.n_hours - 1) * _ONE_HOUR

    def __len__(self):
        return self.n_hours

    def timestamps(self):
        return self.start + np.arange(self.n_hours) * _ONE_HOUR

    def hour_of_day(self):
        return (self.timestamps().astype(np.int64) % 24).astype(np.int64)

    def day_of_week(self):
        """Monday=0 ... Sunday=6."""
        days = self.timestamps().astype("datetime64[D]").astype(np.int64)
        # 1970-01-01 was a Thursday
        return (days + 3) % 7

    def month(self):
        """1..12"""
        return self.timestamps().astype("datetime64[M]").astype(np.int64) % 12 + 1

    def year(self):
        return self.timestamps().astype("datetime64[Y]").astype(np.int64) + 1970

    def dates(self):
        return self.timestamps().astype("datetime64[D]")

    def index_of(self, t):
        """Position of timestamp ``t``; raises KeyError if not on the axis."""
        k = int((np.datetime64(t, "h") - self.start) / _ONE_HOUR)
        if not 0 <= k < self.n_hours:
            raise KeyError(str(t))
        return k

    def slice(self, first, stop):
        return TimeAxis(self.start + first * _ONE_HOUR, stop - first)

    def covers(self, other):
        if other.n_hours == 0:
            return True
        return other.start >= self.start and other.end <= self.end


@dataclass(frozen=True)
class GenerationSeries:
    axis: TimeAxis
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.axis.n_hours,):
            raise ValueError("values do not match the axis length")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("generation must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CapacitySeries:
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = np.array(self.dates, dtype="datetime64[D]")
        values = np.array(self.values, dtype=np.float64)
        if dates.shape != values.shape or dates.ndim != 1:
            raise ValueError("dates and values must be 1-d and of equal length")
        if len(dates) > 1 and np.any(np.diff(dates) != np.timedelta64(1, "D")):
            raise ValueError("capacity dates must be contiguous daily")
        dates.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, axis, capacity_mw):
        days = np.unique(axis.dates())
        return cls(days, np.full(len(days), float(capacity_mw)))


@dataclass(frozen=True)
class PlantRegistry:
    lon: np.ndarray
    lat: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        arrays = [np.array(a, dtype=np.float64).ravel() for a in (self.lon, self.lat, self.capacity)]
        if not (len(arrays[0]) == len(arrays[1]) == len(arrays[2])):
            raise ValueError("lon, lat and capacity must have equal length")
        if len(arrays[0]) == 0:
            raise EmptyRegistry()
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("plant records must be finite")
        if np.any(arrays[2] <= 0):
            raise ValueError("plant capacity must be positive")
        for name, a in zip(("lon", "lat", "capacity"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.lon)


@dataclass(frozen=True)
class CapacityFactorSeries:
    """Hourly capacity factors.

    Modelled series may dip below zero (linear network output); this is
    tolerated and reported via :attr:`n_negative`.  Use :meth:`validate_observed`
    for series that must lie in [0, 1].
    """

    axis: TimeAxis
    values: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.axis.n_hours,):
            raise ValueError(
                f"values have shape {values.shape}, axis has {self.axis.n_hours} hours"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("capacity factors must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_negative(self):
        return int(np.count_nonzero(self.values < 0))

    def validate_observed(self):
        if np.any(self.values < 0) or np.any(self.values > 1):
            bad = int(np.flatnonzero((self.values < 0) | (self.values > 1))[0])
            raise ValueError(
                f"observed CF out of [0, 1] at {format_hour(self.axis.timestamps()[bad])}"
            )
        return self

    def window(self, axis):
        """Sub-series restricted to ``axis`` (which must lie inside ours)."""
        if not self.axis.covers(axis):
            raise KeyError("requested window is not covered by the series")
        first = self.axis.index_of(axis.start) if axis.n_hours else 0
        return CapacityFactorSeries(axis, self.values[first:first + axis.n_hours], self.label)

    def __len__(self):
        return self.axis.n_hours


def _read_rows(path, header):
    """Yield (line_no, fields) for data rows after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file") from None
        if [h.strip() for h in first] != header:
            raise MalformedRow(1, f"expected header {','.join(header)}")
        for fields in reader:
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if len(fields) != len(header):
                raise MalformedRow(reader.line_num, f"expected {len(header)} fields")
            yield reader.line_num, fields


def _hourly_axis(stamps, lines):
    if not stamps:
        raise MalformedRow(2, "no data rows")
    start = stamps[0]
    for i, t in enumerate(stamps):
        expected = start + i * _ONE_HOUR
        if t != expected:
            raise NonContiguousAxis(format_hour(expected), format_hour(t), lines[i])
    return TimeAxis(start, len(stamps))


def _read_hourly(path, header, check):
    stamps, values, lines = [], [], []
    for line, (ts, val) in _read_rows(path, header):
        try:
            t = parse_hour(ts)
            v = float(val)
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
        if not np.isfinite(v):
            raise MalformedRow(line, "non-finite value")
        check(line, v)
        stamps.append(t)
        values.append(v)
        lines.append(line)
    return _hourly_axis(stamps, lines), np.array(values, dtype=np.float64)


def parse_generation_csv(path):
    """Read a ``timestamp,generation_mwh`` file."""

    def check(line, v):
        if v < 0:
            raise NegativeValue(line)

    axis, values = _read_hourly(path, GENERATION_HEADER, check)
    return GenerationSeries(axis, values)


def parse_cf_csv(path, label=None):
    """Read a ``timestamp,cf`` file (observed or modelled capacity factors)."""
    axis, values = _read_hourly(path, CF_HEADER, lambda line, v: None)
    return CapacityFactorSeries(axis, values, label if label is not None else Path(path).stem)


def parse_capacity_csv(path):
    dates, values = [], []
    prev = None
    for line, (ds, val) in _read_rows(path, CAPACITY_HEADER):
        try:
            d = parse_date(ds)
            v = float(val)
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
        if not np.isfinite(v) or v < 0:
            raise MalformedRow(line, "capacity must be finite and non-negative")
        if prev is not None and d != prev + np.timedelta64(1, "D"):
            raise NonContiguousDates(str(prev + np.timedelta64(1, "D")), str(d), line)
        prev = d
        dates.append(d)
        values.append(v)
    if not dates:
        raise MalformedRow(2, "no data rows")
    return CapacitySeries(np.array(dates, dtype="datetime64[D]"), np.array(values))


def parse_plants_csv(path):
    rows = []
    for line, fields in _read_rows(path, PLANTS_HEADER):
        try:
            lon, lat, cap = (float(f) for f in fields)
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
        if not (np.isfinite(lon) and np.isfinite(lat) and np.isfinite(cap)):
            raise MalformedRow(line, "non-finite value")
        if cap <= 0:
            raise MalformedRow(line, "capacity must be positive")
        rows.append((lon, lat, cap))
    if not rows:
        raise EmptyRegistry()
    arr = np.array(rows, dtype=np.float64)
    return PlantRegistry(arr[:, 0], arr[:, 1], arr[:, 2])


def to_capacity_factors(gen, cap):
    """Divide hourly generation by the installed capacity of its UTC date."""
    hour_dates = gen.axis.dates()
    if len(hour_dates) == 0:
        return CapacityFactorSeries(gen.axis, gen.values.copy())
    if len(cap.dates) == 0:
        raise MissingCapacityDate(str(hour_dates[0]))
    pos = (hour_dates - cap.dates[0]).astype(np.int64)
    outside = (pos < 0) | (pos >= len(cap.dates))
    if outside.any():
        raise MissingCapacityDate(str(hour_dates[outside][0]))
    per_hour = cap.values[pos]
    if np.any(per_hour <= 0):
        raise ZeroCapacity(str(hour_dates[np.flatnonzero(per_hour <= 0)[0]]))
    return CapacityFactorSeries(gen.axis, gen.values / per_hour)


def write_hourly_csv(path, axis, values, header=CF_HEADER, fmt="{:.10g}"):
    stamps = axis.timestamps()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, v in zip(stamps, values):
            fh.write(f"{format_hour(t)},{fmt.format(float(v))}\n")


def write_cf_csv(path, series):
    write_hourly_csv(path, series.axis, series.values, CF_HEADER, "{:.17g}")


def write_generation_csv(path, gen):
    write_hourly_csv(path, gen.axis, gen.values, GENERATION_HEADER, "{:.17g}")


def write_capacity_csv(path, cap):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CAPACITY_HEADER) + "\n")
        for d, v in zip(cap.dates, cap.values):
            fh.write(f"{d},{float(v):.17g}\n")


def write_plants_csv(path, plants):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(PLANTS_HEADER) + "\n")
        for lon, lat, c in zip(plants.lon, plants.lat, plants.capacity):
            fh.write(f"{lon:.17g},{lat:.17g},{c:.17g}\n")
