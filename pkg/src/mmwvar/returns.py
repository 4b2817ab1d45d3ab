"""Price/return ingestion, log-return construction and summary statistics.

Returns are always carried in percent units: ``100 * ln(P_t / P_{t-1})``.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from datetime import date, datetime

import numpy as np

from .errors import DataError, DegenerateError, SchemaError, SizeError

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "SummaryStats",
    "load_prices",
    "load_returns",
    "log_returns",
    "summary_stats",
    "as_values",
]

FREQUENCIES = ("daily", "monthly", "other")


def _frozen_array(a, dtype):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_dates(dates):
    if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
        raise DataError("dates must be strictly increasing")


@dataclass(frozen=True)
class PriceSeries:
    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _frozen_array(self.dates, "datetime64[D]"))
        object.__setattr__(self, "prices", _frozen_array(self.prices, np.float64))
        if self.dates.shape != self.prices.shape:
            raise DataError("dates and prices must have the same length")
        _check_dates(self.dates)
        bad = np.flatnonzero(~(self.prices > 0))
        if bad.size:
            raise DataError(f"price at position {bad[0]} is not strictly positive")

    def __len__(self):
        return self.prices.size


@dataclass(frozen=True)
class ReturnSeries:
    dates: np.ndarray
    values: np.ndarray
    frequency: str = "other"

    def __post_init__(self):
        object.__setattr__(self, "dates", _frozen_array(self.dates, "datetime64[D]"))
        object.__setattr__(self, "values", _frozen_array(self.values, np.float64))
        if self.dates.shape != self.values.shape or self.values.ndim != 1:
            raise DataError("dates and values must be 1-D and of equal length")
        if self.frequency not in FREQUENCIES:
            raise DataError(f"frequency must be one of {FREQUENCIES}")
        _check_dates(self.dates)
        if not np.all(np.isfinite(self.values)):
            raise DataError("return values must be finite")

    def __len__(self):
        return self.values.size

    @classmethod
    def from_values(cls, values, start="2000-01-03", frequency="daily"):
        """Wrap bare values with consecutive daily dates (synthetic data, tests)."""
        values = np.asarray(values, dtype=np.float64)
        dates = np.datetime64(start, "D") + np.arange(values.size)
        return cls(dates, values, frequency)

    def slice(self, start, stop):
        return ReturnSeries(self.dates[start:stop], self.values[start:stop], self.frequency)


def as_values(returns):
    """Return the float array behind a ReturnSeries or any array-like."""
    if isinstance(returns, ReturnSeries):
        return np.asarray(returns.values, dtype=np.float64)
    return np.asarray(returns, dtype=np.float64).ravel()


@dataclass(frozen=True)
class SummaryStats:
    n: int
    min: float
    max: float
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float

    def as_dict(self):
        return {
            "n": self.n,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "std_dev": self.std_dev,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
        }


def infer_frequency(dates):
    if len(dates) < 2:
        return "other"
    gap = float(np.median(np.diff(np.asarray(dates, dtype="datetime64[D]")).astype(np.int64)))
    if gap <= 4:
        return "daily"
    if 25 <= gap <= 35:
        return "monthly"
    return "other"


def _parse_date(text, fmt):
    text = text.strip()
    if fmt:
        return datetime.strptime(text, fmt).date()
    return date.fromisoformat(text[:10])


def _open(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8-sig"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8-sig"), newline=""), True
    return source, False


def _read_columns(source, date_column, value_column, date_format):
    fh, owned = _open(source)
    try:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise SchemaError("CSV input is empty or has no header row")
        header = [h.strip() for h in header]
        reader.fieldnames = header
        for col in (date_column, value_column):
            if col not in header:
                raise SchemaError(f"column {col!r} not found; available: {header}")
        rows = []
        # line 1 is the header
        for lineno, rec in enumerate(reader, start=2):
            raw_date = rec.get(date_column)
            raw_val = rec.get(value_column)
            if raw_date is None or not raw_date.strip():
                raise DataError(f"row {lineno}: missing date")
            if raw_val is None or not raw_val.strip():
                raise DataError(f"row {lineno}: missing value in column {value_column!r}")
            try:
                d = _parse_date(raw_date, date_format)
            except ValueError as exc:
                raise DataError(f"row {lineno}: cannot parse date {raw_date!r}") from exc
            try:
                v = float(raw_val)
            except ValueError as exc:
                raise DataError(f"row {lineno}: non-numeric value {raw_val!r}") from exc
            rows.append((d, v, lineno))
    finally:
        if owned:
            fh.close()
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if prev[0] == cur[0]:
            raise DataError(f"row {cur[2]}: duplicate date {cur[0].isoformat()} (also row {prev[2]})")
    return rows


def load_prices(source, date_column="Date", price_column="Adj Close", date_format=None):
    """Read a dated price column from a CSV file or text stream.

    Rows are sorted ascending by date. Blank cells, non-positive prices and
    duplicate dates raise :class:`DataError` naming the offending CSV line.
    """
    rows = _read_columns(source, date_column, price_column, date_format)
    for d, v, lineno in rows:
        if not (v > 0 and math.isfinite(v)):
            raise DataError(f"row {lineno}: price {v} is not strictly positive")
    return PriceSeries([r[0] for r in rows], [r[1] for r in rows])


def load_returns(source, date_column="Date", returns_column="Return", date_format=None, frequency=None):
    """Read a pre-computed return column (percent units) instead of prices."""
    rows = _read_columns(source, date_column, returns_column, date_format)
    for d, v, lineno in rows:
        if not math.isfinite(v):
            raise DataError(f"row {lineno}: return {v} is not finite")
    dates = [r[0] for r in rows]
    freq = frequency or infer_frequency(np.array(dates, dtype="datetime64[D]"))
    return ReturnSeries(dates, [r[1] for r in rows], freq)


def log_returns(prices, frequency=None):
    """Percent log returns; each return is dated by the later day of its pair."""
    if len(prices) < 2:
        raise SizeError("need at least 2 prices to form a return")
    p = prices.prices
    values = 100.0 * np.log(p[1:] / p[:-1])
    freq = frequency or infer_frequency(prices.dates)
    return ReturnSeries(prices.dates[1:], values, freq)


def summary_stats(returns):
    """Min, max, mean, sd (n-1), skewness and non-excess kurtosis (1/n moments)."""
    x = as_values(returns)
    n = x.size
    if n < 3:
        raise SizeError(f"summary statistics need n >= 3, got {n}")
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d**2))
    if m2 <= 0.0 or np.ptp(x) == 0.0:
        raise DegenerateError("constant series has undefined skewness/kurtosis")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return SummaryStats(
        n=int(n),
        min=float(x.min()),
        max=float(x.max()),
        mean=mean,
        std_dev=float(np.sqrt(np.sum(d**2) / (n - 1))),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
    )
