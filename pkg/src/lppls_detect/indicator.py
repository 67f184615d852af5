"""Confidence indicators over ensembles of shrinking calibration windows.

For one endpoint t2, every window of the schedule is calibrated and filtered
independently; the indicator is the fraction of windows whose fit qualifies,
split by the sign of the fitted B into a positive-bubble and a
negative-bubble reading. Robustness against window-size choice comes from
the ensemble itself, so the bookkeeping here must be exact: failed fits stay
in the denominator, gap-crossing windows leave the ensemble entirely.
"""

from __future__ import annotations

from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .calibration import fit_window, window_seed
from .cmaes import CmaesConfig
from .errors import ConfigError, EmptyEnsembleError, LpplsError, NoFitError
from .filters import FilterConfig, FilterVerdict, qualify
from .model import LpplsFit
from .series import (
    BENCHMARK_SCHEDULE,
    LONG_TERM_SCHEDULE,
    SHORT_TERM_SCHEDULE,
    FitWindow,
    PriceSeries,
    WindowSchedule,
    windows_for,
)


@dataclass(frozen=True)
class IndicatorConfig:
    """Everything a scan needs besides the data.

    seed is the global seed; per-window seeds are derived from it together
    with level name, endpoint and window length (cmaes.seed is ignored).
    Windows whose span contains a run of more than max_gap_run missing
    samples are excluded from the ensemble.
    """

    cmaes: CmaesConfig = CmaesConfig()
    filters: FilterConfig = FilterConfig()
    seed: int = 0
    max_gap_run: int = 3
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.max_gap_run < 0:
            raise ConfigError("max_gap_run must be nonnegative")


@dataclass(frozen=True)
class WindowResult:
    """One window of the ensemble: the fit and its verdict, or the failure."""

    window: FitWindow
    fit: LpplsFit | None
    verdict: FilterVerdict | None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict is not None and self.verdict.passed


@dataclass(frozen=True)
class ConfidenceReport:
    t2: int  # timestamp (epoch seconds)
    t2_index: int
    level_name: str
    schedule_tag: str
    n_windows: int
    n_pass_pos: int
    n_pass_neg: int
    per_window: tuple[WindowResult, ...] = field(repr=False, default=())

    @property
    def ci_pos(self) -> float:
        return self.n_pass_pos / self.n_windows

    @property
    def ci_neg(self) -> float:
        return self.n_pass_neg / self.n_windows

    @property
    def peak(self) -> float:
        """The stronger of the two readings; what triggers escalation."""
        return max(self.ci_pos, self.ci_neg)


def _fit_and_qualify(
    series: PriceSeries,
    window: FitWindow,
    cmaes_cfg: CmaesConfig,
    filter_cfg: FilterConfig,
) -> WindowResult:
    """Worker body: calibrate one window and filter the result."""
    try:
        fit = fit_window(series, window, cmaes_cfg)
    except NoFitError as exc:
        return WindowResult(window=window, fit=None, verdict=None, error=str(exc))
    verdict = qualify(fit, series, filter_cfg)
    return WindowResult(window=window, fit=fit, verdict=verdict)


def confidence_at(
    series: PriceSeries,
    t2_index: int,
    schedule: WindowSchedule = BENCHMARK_SCHEDULE,
    config: IndicatorConfig = IndicatorConfig(),
    schedule_tag: str = "benchmark",
    executor: Executor | None = None,
) -> ConfidenceReport:
    """Compute the confidence indicator at one endpoint.

    Only data up to and including t2 is touched, so reports are causal.
    An executor, if given, fans the window fits out; results are collected
    in window order either way, keeping reports deterministic.
    """
    candidate_windows = windows_for(t2_index, schedule, len(series))
    windows = [
        w
        for w in candidate_windows
        if series.max_gap_run(w.t1_index, w.t2_index) <= config.max_gap_run
    ]
    if not windows:
        raise EmptyEnsembleError(
            f"all {len(candidate_windows)} windows at endpoint {t2_index} cross data gaps"
        )

    tasks = [
        (
            series,
            w,
            replace(
                config.cmaes,
                seed=window_seed(
                    config.seed, series.level.name, t2_index, w.t2_index - w.t1_index + 1
                ),
            ),
            config.filters,
        )
        for w in windows
    ]
    if executor is None:
        results = [_fit_and_qualify(*t) for t in tasks]
    else:
        results = list(executor.map(_fit_and_qualify, *zip(*tasks)))

    n_pos = sum(1 for r in results if r.passed and r.fit.B < 0)
    n_neg = sum(1 for r in results if r.passed and r.fit.B > 0)
    return ConfidenceReport(
        t2=int(series.timestamps[t2_index]),
        t2_index=t2_index,
        level_name=series.level.name,
        schedule_tag=schedule_tag,
        n_windows=len(windows),
        n_pass_pos=n_pos,
        n_pass_neg=n_neg,
        per_window=tuple(results),
    )


def scan(
    series: PriceSeries,
    t2_start: int,
    t2_stop: int,
    stride: int = 1,
    schedule: WindowSchedule = BENCHMARK_SCHEDULE,
    config: IndicatorConfig = IndicatorConfig(),
    schedule_tag: str = "benchmark",
    on_error=None,
    on_report=None,
) -> list[ConfidenceReport]:
    """Reports at every stride-th endpoint in [t2_start, t2_stop], ordered.

    Endpoints whose ensemble cannot be formed are skipped; on_error (if
    given) receives (t2_index, exception) for each. on_report streams
    finished reports to the caller as the scan advances.
    """
    if stride < 1:
        raise ConfigError("stride must be at least 1")
    if t2_stop < t2_start:
        raise ConfigError("endpoint range is empty")

    reports: list[ConfidenceReport] = []
    with _pool(config.workers) as executor:
        for t2_index in range(t2_start, t2_stop + 1, stride):
            try:
                report = confidence_at(
                    series, t2_index, schedule, config, schedule_tag, executor
                )
            except LpplsError as exc:
                if on_error is not None:
                    on_error(t2_index, exc)
                continue
            reports.append(report)
            if on_report is not None:
                on_report(report)
    return reports


class _pool:
    """Context manager yielding a ProcessPoolExecutor, or None for 1 worker."""

    def __init__(self, workers: int):
        self.workers = workers
        self._executor = None

    def __enter__(self) -> Executor | None:
        if self.workers > 1:
            self._executor = ProcessPoolExecutor(max_workers=self.workers)
            return self._executor
        return None

    def __exit__(self, *exc):
        if self._executor is not None:
            self._executor.shutdown()
        return False


def split_horizon(
    series: PriceSeries,
    t2_index: int,
    config: IndicatorConfig = IndicatorConfig(),
    executor: Executor | None = None,
) -> tuple[ConfidenceReport, ConfidenceReport]:
    """Short-horizon and long-horizon readings at one endpoint.

    The two schedules partition the benchmark ensemble, and per-window seeds
    depend only on window identity, so benchmark pass counts equal the sum
    of the two partitions' counts.
    """
    short = confidence_at(series, t2_index, SHORT_TERM_SCHEDULE, config, "short_term", executor)
    long_ = confidence_at(series, t2_index, LONG_TERM_SCHEDULE, config, "long_term", executor)
    return short, long_
