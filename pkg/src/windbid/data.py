"""Hourly price/wind records: CSV ingestion and a synthetic generator."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from windbid.errors import DataExhausted, SchemaError
from windbid.market.types import MarketDay
from windbid.scenarios import PowerCurve

log = logging.getLogger(__name__)

HOURS = 24
PRICE_COLUMNS = ("timestamp", "da_price", "rt_price")
WIND_COLUMNS = ("timestamp", "wind_speed")


@dataclass
class DataSet:
    """Aligned hourly records grouped into complete 24-hour days."""

    timestamps: np.ndarray  # datetime64[h]
    da_price: np.ndarray
    rt_price: np.ndarray
    wind_speed: np.ndarray
    dropped_rows: int = 0
    dropped_days: int = 0
    day_starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[h]")
        for name in ("da_price", "rt_price", "wind_speed"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.timestamps.size
        if not (self.da_price.size == self.rt_price.size == self.wind_speed.size == n):
            raise ValueError("record columns differ in length")
        if n > 1 and np.any(np.diff(self.timestamps).astype(np.int64) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        self.day_starts = _complete_days(self.timestamps)
        if self.day_starts.size * HOURS != n:
            raise ValueError("DataSet holds hours outside complete days; build it with group_days")

    @property
    def n_days(self) -> int:
        return self.day_starts.size

    def __len__(self):
        return self.timestamps.size

    def day_slice(self, d: int) -> slice:
        if not 0 <= d < self.n_days:
            raise DataExhausted(f"day {d} out of range, data set holds {self.n_days} complete days")
        start = self.day_starts[d]
        return slice(start, start + HOURS)

    def market_day(self, d: int, curve: PowerCurve) -> MarketDay:
        """Day ``d`` as a bidding context; the recorded day serves as its own forecast."""
        sl = self.day_slice(d)
        speed = self.wind_speed[sl]
        return MarketDay(self.da_price[sl], self.rt_price[sl], curve(speed), speed)

    def subset(self, days) -> "DataSet":
        idx = np.concatenate([np.arange(self.day_starts[d], self.day_starts[d] + HOURS) for d in days]) \
            if len(days) else np.array([], dtype=int)
        return DataSet(self.timestamps[idx], self.da_price[idx], self.rt_price[idx], self.wind_speed[idx])

    def write_csv(self, prices_path, wind_path):
        stamps = [str(t) + ":00" for t in self.timestamps]
        with open(prices_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PRICE_COLUMNS)
            for ts, da, rt in zip(stamps, self.da_price, self.rt_price):
                w.writerow([ts, repr(float(da)), repr(float(rt))])
        with open(wind_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(WIND_COLUMNS)
            for ts, v in zip(stamps, self.wind_speed):
                w.writerow([ts, repr(float(v))])


def _complete_days(stamps):
    """Start offsets of runs of 24 consecutive hours beginning at midnight."""
    starts = []
    i = 0
    n = stamps.size
    while i < n:
        hour = int(stamps[i].astype(np.int64) % HOURS)
        if hour == 0 and i + HOURS <= n and int((stamps[i + HOURS - 1] - stamps[i]).astype(np.int64)) == HOURS - 1:
            starts.append(i)
            i += HOURS
        else:
            i += 1
    return np.array(starts, dtype=np.int64)


def group_days(timestamps, da_price, rt_price, wind_speed, dropped_rows=0) -> DataSet:
    """Keep only complete days, warning about the hours that get discarded."""
    stamps = np.asarray(timestamps, dtype="datetime64[h]")
    starts = _complete_days(stamps)
    keep = (starts[:, None] + np.arange(HOURS)).reshape(-1)
    partial = stamps.size - keep.size
    dropped_days = 0
    if partial:
        kept_dates = set(stamps[keep].astype("datetime64[D]").tolist())
        dropped_days = len(set(stamps.astype("datetime64[D]").tolist()) - kept_dates)
        log.warning("dropped %d hourly records belonging to %d incomplete day(s)", partial, dropped_days)
    ds = DataSet(stamps[keep], np.asarray(da_price, float)[keep], np.asarray(rt_price, float)[keep],
                 np.asarray(wind_speed, float)[keep], dropped_rows=dropped_rows, dropped_days=dropped_days)
    return ds


def _parse_hour(text, path, line):
    try:
        ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(f"bad timestamp {text!r}", path, line, "timestamp") from None
    if ts.tzinfo is not None:
        ts = ts.replace(tzinfo=None) - ts.utcoffset()
    if ts.minute or ts.second or ts.microsecond:
        raise SchemaError(f"timestamp {text!r} is not on the hour", path, line, "timestamp")
    return np.datetime64(ts, "h")


def _read_table(path, columns):
    """Rows keyed by hour; rows with an empty field are skipped and counted."""
    out = {}
    skipped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError("file is empty", path, 1)
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"missing column(s) {missing}", path, 1)
        pos = [header.index(c) for c in columns]
        last = None
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            cells = [row[p].strip() if p < len(row) else "" for p in pos]
            if any(c == "" for c in cells):
                skipped += 1
                continue
            ts = _parse_hour(cells[0], path, line)
            values = []
            for name, cell in zip(columns[1:], cells[1:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise SchemaError(f"cannot parse {cell!r} as a number", path, line, name) from None
                if not np.isfinite(v):
                    raise SchemaError(f"non-finite value {cell!r}", path, line, name)
                values.append(v)
            if last is not None and ts <= last:
                raise SchemaError("timestamps must be strictly increasing", path, line, "timestamp")
            last = ts
            out[ts] = values
    return out, skipped


def ingest(prices_csv, wind_csv) -> DataSet:
    """Join the price and wind files on their hourly timestamps.

    prices: ``timestamp,da_price,rt_price``; wind: ``timestamp,wind_speed``.
    Hours present in only one file count as dropped rows.
    """
    prices, skip_p = _read_table(prices_csv, PRICE_COLUMNS)
    wind, skip_w = _read_table(wind_csv, WIND_COLUMNS)
    for ts, (v,) in wind.items():
        if v < 0:
            raise SchemaError(f"negative wind speed at {ts}", wind_csv, None, "wind_speed")
    common = sorted(set(prices) & set(wind))
    unmatched = len(prices) + len(wind) - 2 * len(common)
    dropped = skip_p + skip_w + unmatched
    if dropped:
        log.warning("dropped %d rows with missing fields or no matching hour", dropped)
    stamps = np.array(common, dtype="datetime64[h]")
    da = np.array([prices[t][0] for t in common])
    rt = np.array([prices[t][1] for t in common])
    ws = np.array([wind[t][0] for t in common])
    return group_days(stamps, da, rt, ws, dropped_rows=dropped)


def synth_data(n_days: int, seed: int, start: str = "2021-01-01") -> DataSet:
    """Synthetic hourly records with diurnal structure.

    Prices follow a daily sinusoid plus AR(1) noise; the real-time price adds
    its own AR(1) deviation.  Wind speed is a Weibull daily level modulated
    over the day plus AR(1) gusts, clamped at zero.
    """
    if n_days < 1:
        raise ValueError("n_days must be at least 1")
    rng = np.random.default_rng(seed)
    n = n_days * HOURS
    hour = np.arange(n) % HOURS

    def ar1(phi, scale):
        e = rng.normal(0.0, scale, n)
        x = np.empty(n)
        x[0] = e[0] / np.sqrt(1 - phi ** 2)
        for t in range(1, n):
            x[t] = phi * x[t - 1] + e[t]
        return x

    base = 40.0 + 12.0 * np.sin(2 * np.pi * (hour - 9) / HOURS) + 6.0 * np.sin(4 * np.pi * (hour - 3) / HOURS)
    da = base + ar1(0.9, 2.5)
    rt = da + ar1(0.7, 6.0)
    level = np.repeat(9.0 * rng.weibull(2.2, n_days), HOURS)
    speed = level * (1.0 + 0.15 * np.sin(2 * np.pi * (hour - 15) / HOURS)) + ar1(0.85, 1.0)
    speed = np.maximum(speed, 0.0)
    t0 = np.datetime64(start, "h")
    stamps = t0 + np.arange(n).astype("timedelta64[h]")
    return DataSet(stamps, da, rt, speed)
