"""Adaptive multilevel detection: escalate to finer timescales on demand.

The coarsest level is scanned continuously. Whenever its confidence reading
crosses the trigger threshold, an episode opens on the next-finer series,
starting one fine sample before the triggering endpoint and stepping forward
until the fine indicator dies out. Episodes recurse into still-finer levels
the same way. Escalation is purely additive: the coarse-level records are
exactly what a plain scan would have produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, LpplsError
from .indicator import IndicatorConfig, confidence_at
from .series import PriceSeries, TimescaleLevel, WindowSchedule


@dataclass(frozen=True)
class LevelSpec:
    """One rung of the plan: a timescale, its window schedule, and the
    threshold at which this level hands off to the next-finer one."""

    level: TimescaleLevel
    schedule: WindowSchedule
    trigger: float

    def __post_init__(self):
        if not (0 < self.trigger <= 1):
            raise ConfigError("trigger threshold must lie in (0, 1]")


@dataclass(frozen=True)
class LevelPlan:
    """Ordered coarse-to-fine levels plus controller knobs.

    zero_run: consecutive zero readings required to close an episode.
    trigger_on: 'max' keys escalation on max(ci_pos, ci_neg); 'pos'
    restricts it to the positive-bubble reading.
    """

    levels: tuple[LevelSpec, ...]
    zero_run: int = 1
    trigger_on: str = "max"

    def __post_init__(self):
        if len(self.levels) < 1:
            raise ConfigError("plan needs at least one level")
        object.__setattr__(self, "levels", tuple(self.levels))
        for coarse, fine in zip(self.levels, self.levels[1:]):
            cs, fs = coarse.level.spacing, fine.level.spacing
            if fs >= cs:
                raise ConfigError(
                    f"levels must get finer: {fine.level.name} ({fs}s) does not "
                    f"refine {coarse.level.name} ({cs}s)"
                )
            if cs % fs != 0:
                raise ConfigError(
                    f"spacing {cs}s of {coarse.level.name} is not a multiple of "
                    f"{fs}s of {fine.level.name}"
                )
        if self.zero_run < 1:
            raise ConfigError("zero_run must be at least 1")
        if self.trigger_on not in ("max", "pos"):
            raise ConfigError("trigger_on must be 'max' or 'pos'")

    @property
    def n_sublevels(self) -> int:
        return len(self.levels) - 1


@dataclass(frozen=True)
class InstantRecord:
    time: int
    level_name: str
    ci_pos: float
    ci_neg: float
    triggered: bool


@dataclass(frozen=True)
class Episode:
    """A contiguous fine-level activation.

    start_time is the first fine endpoint evaluated (one fine sample before
    the triggering coarse endpoint when that sample exists). truncated marks
    episodes cut short by missing fine data rather than a decayed indicator.
    """

    level_name: str
    trigger_time: int
    start_time: int | None
    end_time: int | None
    truncated: bool = False
    n_records: int = 0
    children: tuple["Episode", ...] = ()


@dataclass
class MultilevelTrace:
    records: list[InstantRecord] = field(default_factory=list)
    episodes: list[Episode] = field(default_factory=list)


def _reading(report, how: str) -> float:
    return report.peak if how == "max" else report.ci_pos


def _run_episode(
    feeds: list[PriceSeries],
    plan: LevelPlan,
    depth: int,
    trigger_time: int,
    config: IndicatorConfig,
    trace: MultilevelTrace,
    on_record,
) -> Episode:
    """Scan level `depth` forward from one fine sample before trigger_time."""
    spec = plan.levels[depth]
    series = feeds[depth]
    spacing = spec.level.spacing
    children: list[Episode] = []

    t = trigger_time - spacing
    start_time = None
    end_time = None
    truncated = False
    n_records = 0
    zeros = 0
    while True:
        try:
            idx = series.index_of(t)
            report = confidence_at(series, idx, spec.schedule, config, spec.level.name)
        except LpplsError:
            # endpoint missing or ensemble unformable: cut the episode here
            truncated = True
            break
        value = _reading(report, plan.trigger_on)
        fires = value >= spec.trigger
        record = InstantRecord(
            time=int(series.timestamps[idx]),
            level_name=spec.level.name,
            ci_pos=report.ci_pos,
            ci_neg=report.ci_neg,
            triggered=fires,
        )
        trace.records.append(record)
        if on_record is not None:
            on_record(record)
        n_records += 1
        if start_time is None:
            start_time = record.time
        end_time = record.time

        if fires and depth + 1 < len(plan.levels):
            children.append(
                _run_episode(feeds, plan, depth + 1, record.time, config, trace, on_record)
            )

        if value == 0.0:
            zeros += 1
            if zeros >= plan.zero_run:
                break
        else:
            zeros = 0
        t += spacing

    return Episode(
        level_name=spec.level.name,
        trigger_time=trigger_time,
        start_time=start_time,
        end_time=end_time,
        truncated=truncated,
        n_records=n_records,
        children=tuple(children),
    )


def run(
    feeds: list[PriceSeries],
    plan: LevelPlan,
    t2_start: int,
    t2_stop: int,
    stride: int = 1,
    config: IndicatorConfig = IndicatorConfig(),
    on_record=None,
) -> MultilevelTrace:
    """Drive the controller over benchmark endpoints [t2_start, t2_stop].

    feeds must parallel plan.levels (one series per level, same timescale).
    Endpoints where the benchmark ensemble cannot be formed are skipped, as
    in a plain scan.
    """
    if len(feeds) != len(plan.levels):
        raise ConfigError(
            f"plan has {len(plan.levels)} levels but {len(feeds)} series were given"
        )
    for series, spec in zip(feeds, plan.levels):
        if series.level.spacing != spec.level.spacing:
            raise ConfigError(
                f"series at {series.level.name} does not match plan level {spec.level.name}"
            )
    if stride < 1:
        raise ConfigError("stride must be at least 1")

    bench = feeds[0]
    spec0 = plan.levels[0]
    trace = MultilevelTrace()
    for t2_index in range(t2_start, t2_stop + 1, stride):
        try:
            report = confidence_at(bench, t2_index, spec0.schedule, config, spec0.level.name)
        except LpplsError:
            continue
        value = _reading(report, plan.trigger_on)
        fires = value >= spec0.trigger
        record = InstantRecord(
            time=int(bench.timestamps[t2_index]),
            level_name=spec0.level.name,
            ci_pos=report.ci_pos,
            ci_neg=report.ci_neg,
            triggered=fires,
        )
        trace.records.append(record)
        if on_record is not None:
            on_record(record)
        if fires and plan.n_sublevels > 0:
            trace.episodes.append(
                _run_episode(feeds, plan, 1, record.time, config, trace, on_record)
            )
    return trace
