"""Price series ingestion, validation, resampling, and window generation.

All time arithmetic lives here. Timestamps are integer epoch seconds; fits
downstream work in sample-index time, so everything that converts between
wall clock and index goes through a PriceSeries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, EmptyEnsembleError

DEFAULT_COLUMN_MAP = {"timestamp": "timestamp", "price": "price"}


@dataclass(frozen=True)
class TimescaleLevel:
    """One timescale at which prices are sampled, e.g. ("1h", 3600)."""

    name: str
    spacing: int  # nominal gap between consecutive samples, seconds

    def __post_init__(self):
        if self.spacing <= 0:
            raise ConfigError(f"level {self.name!r}: spacing must be positive, got {self.spacing}")


DAILY = TimescaleLevel("1d", 86_400)
HOURLY = TimescaleLevel("1h", 3_600)
HALF_HOURLY = TimescaleLevel("30m", 1_800)

LEVELS = {lvl.name: lvl for lvl in (DAILY, HOURLY, HALF_HOURLY)}


def parse_level(name: str) -> TimescaleLevel:
    """Look up a level by name ('1d', '1h', '30m'), or parse '<seconds>s'."""
    if name in LEVELS:
        return LEVELS[name]
    if name.endswith("s") and name[:-1].isdigit():
        return TimescaleLevel(name, int(name[:-1]))
    raise ConfigError(f"unknown timescale level {name!r}; expected one of {sorted(LEVELS)} or '<seconds>s'")


@dataclass(frozen=True)
class Gap:
    """A declared hole in a series: `missing` absent samples after `after_index`."""

    after_index: int
    missing: int


@dataclass(frozen=True)
class PriceSeries:
    """Timestamped positive prices at one timescale.

    Invariants enforced at construction: timestamps strictly increasing,
    prices strictly positive, and consecutive gaps equal to the level's
    nominal spacing except across entries in `gaps`. Instances are immutable
    and safe to share across workers.
    """

    timestamps: np.ndarray
    prices: np.ndarray
    level: TimescaleLevel
    gaps: tuple[Gap, ...] = field(default=())

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        px = np.asarray(self.prices, dtype=np.float64)
        if ts.ndim != 1 or px.ndim != 1 or len(ts) != len(px):
            raise DataError("timestamps and prices must be 1-d and of equal length")
        if len(ts) == 0:
            raise DataError("empty series")
        diffs = np.diff(ts)
        if np.any(diffs <= 0):
            i = int(np.argmax(diffs <= 0))
            raise DataError(f"timestamps not strictly increasing at row {i + 1} (t={ts[i + 1]})")
        if np.any(px <= 0) or not np.all(np.isfinite(px)):
            i = int(np.argmax((px <= 0) | ~np.isfinite(px)))
            raise DataError(f"non-positive or non-finite price at row {i} (p={px[i]})")
        gaps = self._detect_gaps(ts, self.level.spacing)
        ts.setflags(write=False)
        px.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)
        object.__setattr__(self, "gaps", gaps)

    @staticmethod
    def _detect_gaps(ts: np.ndarray, spacing: int) -> tuple[Gap, ...]:
        diffs = np.diff(ts)
        gaps = []
        for i in np.nonzero(diffs != spacing)[0]:
            d = int(diffs[i])
            if d % spacing != 0:
                raise DataError(
                    f"timestamp gap of {d}s after row {i} is not a multiple of the {spacing}s spacing"
                )
            gaps.append(Gap(after_index=int(i), missing=d // spacing - 1))
        return tuple(gaps)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def log_prices(self) -> np.ndarray:
        return np.log(self.prices)

    def index_of(self, timestamp: int) -> int:
        """Index of an exact timestamp; DataError if absent."""
        i = int(np.searchsorted(self.timestamps, timestamp))
        if i >= len(self) or self.timestamps[i] != timestamp:
            raise DataError(f"timestamp {timestamp} not present in series")
        return i

    def max_gap_run(self, t1_index: int, t2_index: int) -> int:
        """Longest run of missing samples strictly inside [t1_index, t2_index]."""
        worst = 0
        for g in self.gaps:
            if t1_index <= g.after_index < t2_index:
                worst = max(worst, g.missing)
        return worst

    def slice(self, t1_index: int, t2_index: int) -> "PriceSeries":
        """Sub-series over the inclusive index range."""
        return PriceSeries(
            timestamps=self.timestamps[t1_index : t2_index + 1].copy(),
            prices=self.prices[t1_index : t2_index + 1].copy(),
            level=self.level,
        )


@dataclass(frozen=True)
class FitWindow:
    """One calibration window: inclusive index span [t1_index, t2_index] of a series."""

    t1_index: int
    t2_index: int

    MIN_LENGTH = 30

    def __post_init__(self):
        if self.t1_index < 0 or self.t1_index > self.t2_index:
            raise ConfigError(f"bad window indices ({self.t1_index}, {self.t2_index})")
        if self.length < self.MIN_LENGTH:
            raise ConfigError(f"window length {self.length} below minimum {self.MIN_LENGTH}")

    @property
    def length(self) -> int:
        return self.t2_index - self.t1_index + 1


@dataclass(frozen=True)
class WindowSchedule:
    """Shrinking-window lengths: min_length..max_length stepped by `step` samples."""

    min_length: int
    max_length: int
    step: int

    def __post_init__(self):
        if self.min_length > self.max_length:
            raise ConfigError("schedule min_length exceeds max_length")
        if self.step <= 0:
            raise ConfigError("schedule step must be positive")

    @property
    def count(self) -> int:
        return (self.max_length - self.min_length) // self.step + 1

    def lengths(self) -> list[int]:
        """All window lengths, largest first."""
        return list(range(self.max_length, self.min_length - 1, -self.step))


BENCHMARK_SCHEDULE = WindowSchedule(30, 650, 5)
SHORT_TERM_SCHEDULE = WindowSchedule(30, 200, 5)
LONG_TERM_SCHEDULE = WindowSchedule(205, 650, 5)


def windows_for(t2_index: int, schedule: WindowSchedule, series_len: int) -> list[FitWindow]:
    """Window ensemble ending at t2_index, one per schedule length, largest first.

    Lengths exceeding the available history are dropped. Raises
    EmptyEnsembleError when even the shortest window does not fit.
    """
    if t2_index >= series_len:
        raise EmptyEnsembleError(f"t2_index {t2_index} beyond series of length {series_len}")
    if t2_index + 1 < schedule.min_length:
        raise EmptyEnsembleError(
            f"only {t2_index + 1} samples before t2, need at least {schedule.min_length}"
        )
    out = []
    for length in schedule.lengths():
        t1 = t2_index - length + 1
        if t1 < 0:
            continue
        out.append(FitWindow(t1_index=t1, t2_index=t2_index))
    return out


def _parse_timestamp_column(raw: list[str]) -> np.ndarray:
    """Epoch-seconds or ISO-8601 column, auto-detected for the whole file."""

    def looks_numeric(s: str) -> bool:
        t = s.strip()
        return t[1:].isdigit() if t.startswith(("-", "+")) else t.isdigit()

    numeric = [looks_numeric(s) for s in raw]
    if all(numeric):
        return np.array([int(s) for s in raw], dtype=np.int64)
    if any(numeric):
        i = numeric.index(True)
        raise DataError(f"mixed timestamp formats: row {i} is numeric in an ISO-8601 file")
    out = np.empty(len(raw), dtype=np.int64)
    for i, s in enumerate(raw):
        try:
            dt = datetime.fromisoformat(s.strip().replace("Z", "+00:00"))
        except ValueError as exc:
            raise DataError(f"row {i}: unparseable timestamp {s!r}") from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        out[i] = int(dt.timestamp())
    return out


def load_csv(
    path: str | Path,
    level: TimescaleLevel,
    column_map: Mapping[str, str] | None = None,
) -> PriceSeries:
    """Read a timestamp/price CSV into a validated PriceSeries.

    Rows are sorted by timestamp before validation, so row order in the file
    does not matter. Lines starting with '#' are ignored (provenance headers).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)

    ts_raw: list[str] = []
    px_raw: list[str] = []
    with open(path, newline="") as fh:
        rows = (r for r in fh if not r.startswith("#"))
        reader = csv.DictReader(rows)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        for col in (cmap["timestamp"], cmap["price"]):
            if col not in reader.fieldnames:
                raise ConfigError(f"{path}: missing column {col!r} (have {reader.fieldnames})")
        for row in reader:
            ts_raw.append(row[cmap["timestamp"]])
            px_raw.append(row[cmap["price"]])
    if not ts_raw:
        raise DataError(f"{path}: no data rows")

    timestamps = _parse_timestamp_column(ts_raw)
    try:
        prices = np.array([float(p) for p in px_raw], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: unparseable price") from exc
    for i, p in enumerate(prices):
        if not np.isfinite(p) or p <= 0:
            raise DataError(f"{path}: non-positive price {p} at data row {i}")

    order = np.argsort(timestamps, kind="stable")
    timestamps, prices = timestamps[order], prices[order]
    dup = np.nonzero(np.diff(timestamps) == 0)[0]
    if dup.size:
        raise DataError(f"{path}: duplicate timestamp {timestamps[dup[0]]} at sorted row {dup[0] + 1}")
    return PriceSeries(timestamps=timestamps, prices=prices, level=level)


def resample(series: PriceSeries, target: TimescaleLevel) -> PriceSeries:
    """Downsample to a coarser level, close-of-bucket convention.

    Each target bucket spans `ratio` source slots; its output timestamp is the
    bucket's nominal closing slot and its price is the last observation at or
    before that close. Buckets with no observations become gaps (no row).
    """
    if target.spacing == series.level.spacing:
        return PriceSeries(
            timestamps=series.timestamps.copy(),
            prices=series.prices.copy(),
            level=target,
        )
    if target.spacing % series.level.spacing != 0:
        raise ConfigError(
            f"target spacing {target.spacing}s is not an integer multiple of "
            f"source spacing {series.level.spacing}s"
        )
    s = series.level.spacing
    t0 = int(series.timestamps[0])
    # bucket k covers source slots [t0 + k*T, t0 + (k+1)*T); closes at the last slot
    bucket = (series.timestamps - t0) // target.spacing
    closes = t0 + (bucket + 1) * target.spacing - s
    out_ts, out_px = [], []
    for k in np.unique(bucket):
        mask = bucket == k
        out_ts.append(int(closes[mask][-1]))
        out_px.append(float(series.prices[mask][-1]))
    return PriceSeries(
        timestamps=np.array(out_ts, dtype=np.int64),
        prices=np.array(out_px, dtype=np.float64),
        level=target,
    )


def to_iso(timestamp: int) -> str:
    """Epoch seconds to ISO-8601 UTC."""
    return datetime.fromtimestamp(int(timestamp), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_csv(series: PriceSeries, path: str | Path, header_comment: str | None = None) -> None:
    """Write a series as a timestamp,price CSV (epoch seconds)."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "price"])
        for t, p in zip(series.timestamps, series.prices):
            writer.writerow([int(t), repr(float(p))])
