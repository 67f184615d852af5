"""Empirical crash detection over a daily price series.

A crash is a drop of more than a threshold fraction from a strict local
price peak to the lowest price reached within a fixed horizon after it.
Detection is intentionally simple and purely price-based; the interesting
part is the bookkeeping around overlapping candidates and the summary
statistics used to characterize crash frequency and severity.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError, UsageError
from .series import PriceSeries

SECONDS_PER_DAY = 86_400
DEFAULT_THRESHOLD = 0.15
DEFAULT_HORIZON_DAYS = 21
SIZE_BIN_WIDTH = 5  # percentage points
N_SIZE_BINS = 20


@dataclass(frozen=True)
class CrashEvent:
    peak_time: int
    peak_price: float
    end_time: int
    end_price: float

    def __post_init__(self):
        if self.end_time <= self.peak_time:
            raise UsageError("crash must end after its peak")
        if self.end_price >= self.peak_price:
            raise UsageError("crash end price must lie below the peak price")

    @property
    def duration_days(self) -> int:
        return round((self.end_time - self.peak_time) / SECONDS_PER_DAY)

    @property
    def size(self) -> float:
        """Fractional drop from peak to end."""
        return (self.peak_price - self.end_price) / self.peak_price


def detect_crashes(
    series: PriceSeries,
    threshold: float = DEFAULT_THRESHOLD,
    horizon_days: int = DEFAULT_HORIZON_DAYS,
    peak_window: int = 2,
) -> list[CrashEvent]:
    """Find peak-to-trough drops larger than `threshold` within `horizon_days`.

    A candidate peak must be strictly higher than every price within
    peak_window samples on both sides. Its crash end is the lowest price in
    the horizon after the peak; the event is emitted only if the implied
    drop exceeds the threshold, and scanning resumes past the emitted end,
    so events never overlap.
    """
    if series.level.spacing < SECONDS_PER_DAY:
        raise ResolutionError(
            f"crash detection expects daily data, got {series.level.name}; "
            "resample the series to daily first"
        )
    if not (0 < threshold < 1):
        raise UsageError("threshold must be a fraction in (0, 1)")
    if horizon_days < 1 or peak_window < 1:
        raise UsageError("horizon_days and peak_window must be positive")

    ts = series.timestamps
    px = series.prices
    n = len(series)
    events: list[CrashEvent] = []
    i = 0
    while i < n:
        lo = max(0, i - peak_window)
        hi = min(n, i + peak_window + 1)
        others = np.delete(px[lo:hi], i - lo)
        if others.size == 0 or px[i] > float(np.max(others)):
            horizon_end = ts[i] + horizon_days * SECONDS_PER_DAY
            j_hi = int(np.searchsorted(ts, horizon_end, side="right"))
            if j_hi > i + 1:
                rel = int(np.argmin(px[i + 1 : j_hi]))
                j = i + 1 + rel
                size = (px[i] - px[j]) / px[i]
                if size > threshold:
                    events.append(
                        CrashEvent(
                            peak_time=int(ts[i]),
                            peak_price=float(px[i]),
                            end_time=int(ts[j]),
                            end_price=float(px[j]),
                        )
                    )
                    i = j + 1
                    continue
        i += 1
    return events


@dataclass(frozen=True)
class CrashSummary:
    n_events: int
    by_year: dict[int, int]
    size_bins: tuple[int, ...]  # counts per 5-percentage-point bin, 0% to 100%
    n_large: int  # events with size > 25%
    large_fraction: float
    duration_min: int
    duration_median: float
    duration_max: int


def _attribution_year(event: CrashEvent, horizon_days: int) -> int:
    """Calendar year a crash is charged to.

    Events are dated by the end of their detection horizon rather than the
    peak, so a late-December peak whose drawdown resolves in January counts
    toward the new year.
    """
    from .series import to_iso

    t = event.peak_time + horizon_days * SECONDS_PER_DAY
    return int(to_iso(t)[:4])


def crash_summary(
    events: list[CrashEvent], horizon_days: int = DEFAULT_HORIZON_DAYS
) -> CrashSummary:
    """Aggregate counts, size histogram and duration stats for a crash list."""
    if not events:
        return CrashSummary(
            n_events=0,
            by_year={},
            size_bins=(0,) * N_SIZE_BINS,
            n_large=0,
            large_fraction=0.0,
            duration_min=0,
            duration_median=0.0,
            duration_max=0,
        )

    by_year: dict[int, int] = {}
    bins = [0] * N_SIZE_BINS
    n_large = 0
    durations = []
    for e in events:
        year = _attribution_year(e, horizon_days)
        by_year[year] = by_year.get(year, 0) + 1
        pct = e.size * 100.0
        k = min(int(pct // SIZE_BIN_WIDTH), N_SIZE_BINS - 1)
        bins[k] += 1
        if e.size > 0.25:
            n_large += 1
        durations.append(e.duration_days)

    return CrashSummary(
        n_events=len(events),
        by_year=dict(sorted(by_year.items())),
        size_bins=tuple(bins),
        n_large=n_large,
        large_fraction=n_large / len(events),
        duration_min=min(durations),
        duration_median=float(statistics.median(durations)),
        duration_max=max(durations),
    )
