"""Tick ingestion, cleaning, and per-day derived series.

Raw transaction records (timestamp, price, volume) become per-day containers
holding integer-cent price changes and second-valued trade durations.  The
cleaning rules follow the usual tick-data hygiene for exchange trades:

1. drop ticks outside trading hours,
2. drop ticks in the opening window (volatility there is too steep for the
   smoothing step),
3. drop ticks without a recorded price,
4. drop outliers more than 10 mean absolute deviations from a centered
   rolling median of 50 neighbours,
5. round prices to the nearest cent.

Equal timestamps are legal and common; record order within a timestamp is
preserved everywhere.  ``aggregate_simultaneous`` optionally merges them into
volume-weighted single ticks.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path

import numpy as np

from .errors import CleaningWarning, DataError

__all__ = [
    "RowError",
    "Tick",
    "TickDay",
    "aggregate_simultaneous",
    "clean_day",
    "load_ticks",
    "partition_days",
    "read_day_csv",
    "write_day_csv",
    "write_raw_csv",
]

OPEN_DEFAULT = time(9, 30)
CLOSE_DEFAULT = time(16, 0)
SKIP_AFTER_OPEN_DEFAULT = timedelta(minutes=5)

MAD_WINDOW_HALF = 25          # 25 before + 25 after = 50 neighbours
MAD_MULTIPLIER = 10.0
MIN_TICKS_FOR_OUTLIER_FILTER = 51

MS_PER_DAY = 86_400_000


@dataclass(frozen=True)
class Tick:
    """One transaction record."""

    day: date
    time_ms: int          # milliseconds since local midnight
    price: float
    volume: int


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class TickDay:
    """One trading day of cleaned ticks with derived series.

    ``durations`` (seconds) and ``price_changes`` (cents) are defined for
    observations 1..n, so both have one element fewer than the tick arrays.
    """

    day_id: date
    time_ms: np.ndarray
    price: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        self.time_ms = np.asarray(self.time_ms, dtype=np.int64)
        self.price = np.asarray(self.price, dtype=float)
        self.volume = np.asarray(self.volume, dtype=np.int64)

    @property
    def n_ticks(self) -> int:
        return int(self.time_ms.size)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.time_ms) / 1000.0

    @property
    def price_changes(self) -> np.ndarray:
        return np.rint(100.0 * np.diff(self.price)).astype(np.int64)

    def obs_times_seconds(self) -> np.ndarray:
        """Time of day (seconds) of observations 1..n."""
        return self.time_ms[1:] / 1000.0


def _parse_timestamp(text: str) -> tuple[date, int]:
    dt = datetime.fromisoformat(text.strip())
    ms = (dt.hour * 3600 + dt.minute * 60 + dt.second) * 1000 + dt.microsecond // 1000
    return dt.date(), ms


def load_ticks(source) -> tuple[list[Tick], list[RowError]]:
    """Parse a tick CSV (header ``timestamp,price,volume``) in file order.

    Malformed rows are collected as ``RowError`` with 1-based line numbers;
    parsing continues past them.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return load_ticks(fh)
    if isinstance(source, str):
        source = io.StringIO(source)

    reader = csv.reader(source)
    ticks: list[Tick] = []
    errors: list[RowError] = []
    for lineno, row in enumerate(reader, start=1):
        if not row or (lineno == 1 and row[0].strip().lower() == "timestamp"):
            continue
        if len(row) < 3:
            errors.append(RowError(lineno, f"expected 3 columns, got {len(row)}"))
            continue
        try:
            day, ms = _parse_timestamp(row[0])
        except ValueError:
            errors.append(RowError(lineno, f"unparseable timestamp {row[0]!r}"))
            continue
        try:
            price = float(row[1])
        except ValueError:
            errors.append(RowError(lineno, f"unparseable price {row[1]!r}"))
            continue
        try:
            volume = int(row[2])
        except ValueError:
            errors.append(RowError(lineno, f"unparseable volume {row[2]!r}"))
            continue
        if volume < 0:
            errors.append(RowError(lineno, f"negative volume {volume}"))
            continue
        ticks.append(Tick(day=day, time_ms=ms, price=price, volume=volume))
    return ticks, errors


def partition_days(ticks: list[Tick]) -> dict[date, list[Tick]]:
    """Group ticks by calendar day, preserving record order within a day."""
    out: dict[date, list[Tick]] = {}
    for t in ticks:
        out.setdefault(t.day, []).append(t)
    return {d: out[d] for d in sorted(out)}


def _round_cents(p: np.ndarray) -> np.ndarray:
    # round half away from zero, the conventional financial rule
    return np.sign(p) * np.floor(np.abs(p) * 100.0 + 0.5) / 100.0


def _rolling_outlier_mask(price: np.ndarray) -> np.ndarray:
    """True where the tick survives the rolling median/MAD filter.

    The window is the 25 ticks before and 25 after (truncated at day edges),
    excluding the focal tick itself; both the median and the MAD come from
    that window.
    """
    n = price.size
    k = MAD_WINDOW_HALF
    keep = np.ones(n, dtype=bool)
    padded = np.concatenate([np.full(k, np.nan), price, np.full(k, np.nan)])
    win = np.lib.stride_tricks.sliding_window_view(padded, 2 * k + 1)
    chunk = 65_536
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        block = win[lo:hi].copy()
        block[:, k] = np.nan
        med = np.nanmedian(block, axis=1)
        mad = np.nanmean(np.abs(block - med[:, None]), axis=1)
        keep[lo:hi] = np.abs(price[lo:hi] - med) <= MAD_MULTIPLIER * mad
    return keep


def clean_day(
    ticks: list[Tick],
    open_time: time = OPEN_DEFAULT,
    close_time: time = CLOSE_DEFAULT,
    skip_after_open: timedelta = SKIP_AFTER_OPEN_DEFAULT,
) -> TickDay:
    """Apply the cleaning rules to one day of ticks and derive the series.

    Raises DataError when fewer than 2 ticks survive.  If fewer than 51 ticks
    remain before the outlier step, that step is skipped with a warning.
    """
    if not ticks:
        raise DataError("day unusable: no ticks")
    day_id = ticks[0].day
    order = np.argsort([t.time_ms for t in ticks], kind="stable")
    tms = np.array([ticks[i].time_ms for i in order], dtype=np.int64)
    price = np.array([ticks[i].price for i in order], dtype=float)
    volume = np.array([ticks[i].volume for i in order], dtype=np.int64)

    open_ms = (open_time.hour * 3600 + open_time.minute * 60 + open_time.second) * 1000
    close_ms = (close_time.hour * 3600 + close_time.minute * 60 + close_time.second) * 1000
    skip_ms = int(skip_after_open.total_seconds() * 1000)

    keep = (tms >= open_ms) & (tms <= close_ms)
    keep &= tms >= open_ms + skip_ms
    keep &= np.isfinite(price) & (price > 0.0)
    tms, price, volume = tms[keep], price[keep], volume[keep]

    if tms.size >= MIN_TICKS_FOR_OUTLIER_FILTER:
        mask = _rolling_outlier_mask(price)
        tms, price, volume = tms[mask], price[mask], volume[mask]
    elif tms.size:
        warnings.warn(
            f"day {day_id}: only {tms.size} ticks, outlier filter skipped",
            CleaningWarning)

    if tms.size < 2:
        raise DataError(f"day unusable: {tms.size} ticks remain after cleaning")

    return TickDay(day_id=day_id, time_ms=tms, price=_round_cents(price),
                   volume=volume)


def aggregate_simultaneous(day: TickDay) -> TickDay:
    """Merge ticks sharing a timestamp into one volume-weighted tick.

    The merged price is the volume-weighted mean rounded to the nearest cent
    (half away from zero); the merged volume is the group total.  Groups with
    zero total volume fall back to the unweighted mean with a warning.
    """
    tms, start = np.unique(day.time_ms, return_index=True)
    if tms.size == day.n_ticks:
        return TickDay(day_id=day.day_id, time_ms=day.time_ms.copy(),
                       price=day.price.copy(), volume=day.volume.copy())
    bounds = np.append(start, day.n_ticks)
    counts = np.diff(bounds)
    vsum = np.add.reduceat(day.volume.astype(float), start)
    pvsum = np.add.reduceat(day.price * day.volume, start)
    psum = np.add.reduceat(day.price, start)
    zero_vol = vsum <= 0.0
    if np.any(zero_vol & (counts > 1)):
        warnings.warn(
            f"day {day.day_id}: zero total volume in a timestamp group, "
            "unweighted mean used", CleaningWarning)
    price = np.where(zero_vol, psum / counts, pvsum / np.where(vsum > 0, vsum, 1.0))
    return TickDay(day_id=day.day_id, time_ms=tms,
                   price=_round_cents(price),
                   volume=np.rint(vsum).astype(np.int64))


def raw_csv_text(day: TickDay) -> str:
    """The day in the raw input schema ``timestamp,price,volume``."""
    base = day.day_id.isoformat()
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["timestamp", "price", "volume"])
    for i in range(day.n_ticks):
        ms = int(day.time_ms[i])
        hh, rem = divmod(ms, 3_600_000)
        mm, rem = divmod(rem, 60_000)
        ss, frac = divmod(rem, 1000)
        w.writerow([f"{base}T{hh:02d}:{mm:02d}:{ss:02d}.{frac:03d}",
                    f"{day.price[i]:.2f}", day.volume[i]])
    return buf.getvalue()


def write_raw_csv(day: TickDay, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(raw_csv_text(day))


DAY_CSV_HEADER = ["time_ms", "price", "volume", "duration_s", "price_change_cents"]


def write_day_csv(day: TickDay, path) -> None:
    """Write the per-day cleaned schema; the first tick has no derived fields."""
    durations = day.durations
    changes = day.price_changes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DAY_CSV_HEADER)
        for i in range(day.n_ticks):
            if i == 0:
                w.writerow([day.time_ms[0], f"{day.price[0]:.2f}", day.volume[0], "", ""])
            else:
                w.writerow([day.time_ms[i], f"{day.price[i]:.2f}", day.volume[i],
                            f"{durations[i - 1]:.3f}", changes[i - 1]])


def read_day_csv(path, day_id: date | None = None) -> TickDay:
    path = Path(path)
    if day_id is None:
        try:
            day_id = date.fromisoformat(path.stem.split("__")[0])
        except ValueError as exc:
            raise DataError(f"cannot infer day id from {path.name!r}") from exc
    tms, price, volume = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty day file")
        for row in reader:
            tms.append(int(row[0]))
            price.append(float(row[1]))
            volume.append(int(row[2]))
    if len(tms) < 2:
        raise DataError(f"{path}: day unusable, fewer than 2 ticks")
    return TickDay(day_id=day_id, time_ms=np.array(tms, dtype=np.int64),
                   price=np.array(price), volume=np.array(volume, dtype=np.int64))
