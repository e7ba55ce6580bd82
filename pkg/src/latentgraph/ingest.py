"""OHLC loading, validation, kline fetching and log-return transforms."""

from __future__ import annotations

import csv
import json
import logging
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    GapDetected,
    HttpError,
    MalformedRow,
    NonMonotonicTimestamps,
    NonPositivePrice,
    SeriesTooShort,
)

log = logging.getLogger(__name__)

CHANNELS = ("open", "high", "low", "close")
CSV_HEADER = ("timestamp",) + CHANNELS

INTERVAL_MS = {
    "1m": 60_000,
    "5m": 300_000,
    "15m": 900_000,
    "30m": 1_800_000,
    "1h": 3_600_000,
    "4h": 14_400_000,
    "1d": 86_400_000,
}


@dataclass(frozen=True)
class OhlcSeries:
    entity_id: str
    timestamps: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        object.__setattr__(self, "timestamps", ts)
        for name in CHANNELS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != ts.shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {ts.shape}")
            object.__setattr__(self, name, arr)
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise NonMonotonicTimestamps(f"{self.entity_id}: timestamps not strictly increasing")
        prices = self.prices()
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            bad = int(np.argwhere(~(prices > 0))[0, 0]) if np.any(~(prices > 0)) else -1
            raise NonPositivePrice(f"{self.entity_id}: non-positive or non-finite price at bar {bad}")

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def prices(self) -> np.ndarray:
        """(T_raw, 4) matrix in channel order open, high, low, close."""
        return np.column_stack([getattr(self, c) for c in CHANNELS])

    @classmethod
    def from_matrix(cls, entity_id: str, timestamps, prices: np.ndarray) -> "OhlcSeries":
        prices = np.asarray(prices, dtype=np.float64)
        return cls(entity_id, timestamps, prices[:, 0], prices[:, 1], prices[:, 2], prices[:, 3])

    def slice(self, start: int, stop: int) -> "OhlcSeries":
        return OhlcSeries.from_matrix(self.entity_id, self.timestamps[start:stop], self.prices()[start:stop])


@dataclass(frozen=True)
class ReturnSeries:
    entity_id: str
    values: np.ndarray
    timestamps: np.ndarray

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def slice(self, start: int, stop: int) -> "ReturnSeries":
        return ReturnSeries(self.entity_id, self.values[start:stop], self.timestamps[start:stop])


def load_csv(path: str | Path, entity_id: str) -> OhlcSeries:
    """Read a ``timestamp,open,high,low,close`` file.

    Rows may appear in any order; they are sorted by timestamp. Duplicate
    timestamps are rejected.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise MalformedRow(1, f"expected header {','.join(CSV_HEADER)}, got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise MalformedRow(line_no, f"expected 5 fields, got {len(row)}")
            try:
                ts = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from None
            if not all(np.isfinite(vals)) or min(vals) <= 0:
                raise NonPositivePrice(f"{entity_id}: line {line_no} has non-positive price")
            rows.append((ts, *vals))
    if not rows:
        raise MalformedRow(2, "no data rows")
    rows.sort(key=lambda r: r[0])
    arr = np.array(rows, dtype=np.float64)
    ts = np.array([r[0] for r in rows], dtype=np.int64)
    dup = np.flatnonzero(np.diff(ts) == 0)
    if dup.size:
        raise NonMonotonicTimestamps(f"{entity_id}: duplicate timestamp {ts[dup[0]]}")
    return OhlcSeries.from_matrix(entity_id, ts, arr[:, 1:])


def write_csv(series: OhlcSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ts, row in zip(series.timestamps, series.prices()):
            w.writerow([int(ts)] + [repr(float(v)) for v in row])


def log_returns(series: OhlcSeries) -> ReturnSeries:
    """Per-channel consecutive-bar log returns, aligned to the later bar."""
    if len(series) < 2:
        raise SeriesTooShort(f"{series.entity_id}: need at least 2 bars, got {len(series)}")
    p = series.prices()
    # log of the ratio keeps returns exactly invariant to power-of-two rescaling
    return ReturnSeries(series.entity_id, np.log(p[1:] / p[:-1]), series.timestamps[1:].copy())


def find_gaps(timestamps: np.ndarray, interval_ms: int) -> list[tuple[int, int]]:
    """Pairs (previous_ts, next_ts) where one or more bars are missing."""
    d = np.diff(timestamps)
    idx = np.flatnonzero(d != interval_ms)
    return [(int(timestamps[i]), int(timestamps[i + 1])) for i in idx]


def forward_fill(series: OhlcSeries, interval_ms: int) -> OhlcSeries:
    """Insert flat bars (O=H=L=C=previous close) for missing timestamps."""
    ts = series.timestamps
    full = np.arange(ts[0], ts[-1] + 1, interval_ms, dtype=np.int64)
    if full.size == ts.size:
        return series
    pos = np.searchsorted(ts, full, side="right") - 1
    prices = series.prices()[pos]
    missing = ts[pos] != full
    prices[missing] = series.close[pos[missing]][:, None]
    return OhlcSeries.from_matrix(series.entity_id, full, prices)


def _get_json(url: str, timeout: float) -> object:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def fetch_klines(
    endpoint: str,
    symbol: str,
    interval: str = "1h",
    start: int = 0,
    end: int = 0,
    *,
    limit: int = 1000,
    gap_tolerance: int = 0,
    fill: bool = False,
    max_attempts: int = 5,
    backoff: float = 0.5,
    timeout: float = 30.0,
    sleep: Callable[[float], None] = time.sleep,
    entity_id: str | None = None,
) -> OhlcSeries:
    """Page through a public klines endpoint between ``start`` and ``end`` (ms).

    The endpoint is queried with ``symbol, interval, startTime, endTime, limit``
    and must answer with an array of arrays whose first five fields are open
    time and O/H/L/C (decimal strings are accepted). Each page is retried with
    exponential backoff up to ``max_attempts`` times.
    """
    if interval not in INTERVAL_MS:
        raise ConfigError(f"unsupported interval {interval!r}; choose from {sorted(INTERVAL_MS)}")
    step = INTERVAL_MS[interval]
    rows: dict[int, list[float]] = {}
    cursor = int(start)
    while cursor <= end:
        query = urllib.parse.urlencode(
            {"symbol": symbol, "interval": interval, "startTime": cursor, "endTime": int(end), "limit": limit}
        )
        url = f"{endpoint}{'&' if '?' in endpoint else '?'}{query}"
        page = None
        for attempt in range(max_attempts):
            try:
                page = _get_json(url, timeout)
                break
            except urllib.error.HTTPError as exc:
                err = HttpError(f"{symbol}: HTTP {exc.code} after {attempt + 1} attempt(s)", exc.code)
            except (urllib.error.URLError, OSError, ValueError) as exc:
                err = HttpError(f"{symbol}: {exc} after {attempt + 1} attempt(s)")
            if attempt + 1 < max_attempts:
                sleep(backoff * 2**attempt)
        if page is None:
            raise err
        if not page:
            break
        for k in page:
            rows[int(k[0])] = [float(v) for v in k[1:5]]
        last = max(int(k[0]) for k in page)
        log.debug("%s: fetched %d bars up to %d", symbol, len(page), last)
        if last < cursor:
            break
        cursor = last + step

    if not rows:
        raise HttpError(f"{symbol}: endpoint returned no bars")
    ts = np.array(sorted(rows), dtype=np.int64)
    series = OhlcSeries.from_matrix(entity_id or symbol, ts, np.array([rows[t] for t in ts]))
    gaps = find_gaps(ts, step)
    missing = sum((b - a) // step - 1 for a, b in gaps)
    if missing > gap_tolerance:
        if not fill:
            raise GapDetected(gaps)
    if gaps and fill:
        series = forward_fill(series, step)
    return series
