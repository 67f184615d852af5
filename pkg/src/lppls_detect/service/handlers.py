"""Endpoint bodies, written as plain functions over the request models.

The CLI calls these directly (in-process) and the FastAPI app exposes the
same functions over HTTP, so one code path serves both. Handlers never
write files; serialization to disk belongs to the caller.
"""

from __future__ import annotations

import json
import queue
import threading
from datetime import datetime, timezone
from typing import Iterator

import numpy as np

from .. import __version__
from ..calibration import fit_window, window_seed
from ..crashes import crash_summary, detect_crashes
from ..errors import ConfigError, DataError, NoFitError, UsageError
from ..filters import qualify
from ..indicator import confidence_at, scan as scan_indicator
from ..model import generate_synthetic, lppls_curve
from ..multilevel import LevelPlan, LevelSpec, run as run_multilevel
from ..reports import config_digest, episode_dict, record_dict, report_detail, summary_dict
from ..series import (
    DAILY,
    FitWindow,
    PriceSeries,
    WindowSchedule,
    load_csv,
    parse_level,
    resample,
)
from . import schemas


def load_series(payload: schemas.SeriesPayload) -> PriceSeries:
    level = parse_level(payload.level)
    if payload.path is not None:
        if payload.timestamps is not None or payload.prices is not None:
            raise UsageError("give either a path or inline arrays, not both")
        return load_csv(payload.path, level)
    if payload.timestamps is None or payload.prices is None:
        raise UsageError("series needs a path or both timestamps and prices")
    return PriceSeries(
        timestamps=np.asarray(payload.timestamps, dtype=np.int64),
        prices=np.asarray(payload.prices, dtype=np.float64),
        level=level,
    )


def resolve_endpoint(series: PriceSeries, value, default: int) -> int:
    """An endpoint given as a sample index (int) or ISO date/datetime (str)."""
    if value is None:
        idx = default
    elif isinstance(value, bool):
        raise UsageError("endpoint must be an index or an ISO date")
    elif isinstance(value, int):
        idx = value
    elif isinstance(value, str):
        text = value.strip()
        if "T" not in text:
            text += "T00:00:00+00:00"
        elif text.endswith("Z"):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError as exc:
            raise UsageError(f"bad endpoint {value!r}: {exc}") from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        idx = series.index_of(int(dt.timestamp()))
    else:
        raise UsageError(f"bad endpoint {value!r}")
    if not (0 <= idx < len(series)):
        raise UsageError(f"endpoint index {idx} outside series of length {len(series)}")
    return idx


def run_digest(req, exclude_workers: bool = True) -> str:
    """Digest of a request for provenance headers.

    Worker count shapes scheduling, never results, so it stays out of the
    digest: reruns at different parallelism must produce identical files.
    """
    dump = req.model_dump()
    if exclude_workers and isinstance(dump.get("options"), dict):
        dump["options"].pop("workers", None)
    return config_digest(dump)


def _verdict_model(verdict) -> schemas.VerdictModel:
    return schemas.VerdictModel(
        m_ok=verdict.m_ok,
        omega_ok=verdict.omega_ok,
        tc_ok=verdict.tc_ok,
        oscillation_ok=verdict.oscillation_ok,
        damping_ok=verdict.damping_ok,
        rel_err_ok=verdict.rel_err_ok,
        lomb_ok=verdict.lomb_ok,
        ar1_ok=verdict.ar1_ok,
        passed=verdict.passed,
        damping=verdict.damping,
        half_periods=verdict.half_periods,
        max_rel_err_observed=verdict.max_rel_err_observed,
        lomb_p=verdict.lomb_p,
        pp_stat=verdict.pp_stat,
        df_stat=verdict.df_stat,
    )


def handle_fit(req: schemas.FitRequest) -> schemas.FitResponse:
    series = load_series(req.series)
    t1 = resolve_endpoint(series, req.t1, 0)
    t2 = resolve_endpoint(series, req.t2, len(series) - 1)
    window = FitWindow(t1, t2)
    seed = window_seed(req.options.seed, series.level.name, t2, t2 - t1 + 1)
    cmaes_cfg = req.options.cmaes.to_domain(seed)
    try:
        fit = fit_window(series, window, cmaes_cfg)
    except NoFitError as exc:
        return schemas.FitResponse(status="no_fit", detail=str(exc))
    verdict = qualify(fit, series, req.options.filters.to_domain())

    times = np.arange(t2 - t1 + 1, dtype=np.float64)
    fitted = np.exp(lppls_curve(times, fit.tc, fit.m, fit.omega, fit.A, fit.B, fit.C1, fit.C2))
    return schemas.FitResponse(
        status="ok",
        fit=schemas.FitParams(
            tc=fit.tc,
            m=fit.m,
            omega=fit.omega,
            A=fit.A,
            B=fit.B,
            C1=fit.C1,
            C2=fit.C2,
            ssr=fit.ssr,
            converged=fit.converged,
        ),
        verdict=_verdict_model(verdict),
        curve=schemas.CurveModel(
            timestamps=[int(t) for t in series.timestamps[t1 : t2 + 1]],
            actual=[float(p) for p in series.prices[t1 : t2 + 1]],
            fitted=[float(p) for p in fitted],
        ),
    )


def _row(report) -> schemas.ScanRow:
    return schemas.ScanRow(
        t2=report.t2,
        level_name=report.level_name,
        schedule_tag=report.schedule_tag,
        n_windows=report.n_windows,
        n_pass_pos=report.n_pass_pos,
        n_pass_neg=report.n_pass_neg,
        ci_pos=report.ci_pos,
        ci_neg=report.ci_neg,
    )


def handle_scan(req: schemas.ScanRequest) -> schemas.ScanResponse:
    series = load_series(req.series)
    schedule = WindowSchedule(*req.schedule)
    config = req.options.to_domain()
    default_start = schedule.min_length - 1
    t2_start = resolve_endpoint(series, req.t2_start, min(default_start, len(series) - 1))
    t2_stop = resolve_endpoint(series, req.t2_stop, len(series) - 1)

    skipped: list[int] = []
    reports = scan_indicator(
        series,
        t2_start,
        t2_stop,
        req.stride,
        schedule,
        config,
        on_error=lambda idx, exc: skipped.append(idx),
    )
    response = schemas.ScanResponse(
        rows=[_row(r) for r in reports],
        skipped=skipped,
        config_digest=run_digest(req),
    )
    if req.detail:
        response.detail_reports = [report_detail(r) for r in reports]
    if req.split_horizon:
        halves: dict[str, list[schemas.ScanRow]] = {"short_term": [], "long_term": []}
        for tag, sched in (
            ("short_term", WindowSchedule(req.schedule[0], 200, req.schedule[2])),
            ("long_term", WindowSchedule(205, req.schedule[1], req.schedule[2])),
        ):
            part = scan_indicator(
                series, t2_start, t2_stop, req.stride, sched, config, tag, on_error=lambda i, e: None
            )
            halves[tag] = [_row(r) for r in part]
        response.short_rows = halves["short_term"]
        response.long_rows = halves["long_term"]
    return response


def _build_plan(opts: schemas.PlanOptions) -> LevelPlan:
    specs = tuple(
        LevelSpec(parse_level(lv.level), WindowSchedule(*lv.schedule), lv.trigger)
        for lv in opts.levels
    )
    return LevelPlan(levels=specs, zero_run=opts.zero_run, trigger_on=opts.trigger_on)


def handle_multilevel(
    req: schemas.MultilevelRequest, on_record=None
) -> schemas.MultilevelResponse:
    feeds = [load_series(p) for p in req.feeds]
    plan = _build_plan(req.plan)
    if not feeds:
        raise ConfigError("at least one series feed is required")
    bench = feeds[0]
    sched0 = plan.levels[0].schedule
    t2_start = resolve_endpoint(
        series=bench, value=req.t2_start, default=min(sched0.min_length - 1, len(bench) - 1)
    )
    t2_stop = resolve_endpoint(bench, req.t2_stop, len(bench) - 1)
    trace = run_multilevel(
        feeds, plan, t2_start, t2_stop, req.stride, req.options.to_domain(), on_record
    )
    return schemas.MultilevelResponse(
        records=[
            schemas.RecordRow(
                time=r.time,
                level_name=r.level_name,
                ci_pos=r.ci_pos,
                ci_neg=r.ci_neg,
                triggered=r.triggered,
            )
            for r in trace.records
        ],
        episodes=[episode_dict(e) for e in trace.episodes],
        config_digest=run_digest(req),
    )


def iter_multilevel(req: schemas.MultilevelRequest) -> Iterator[str]:
    """NDJSON lines: one per instant record as produced, then an episode
    summary line (or an error line)."""
    q: queue.Queue = queue.Queue(maxsize=256)

    def work():
        try:
            response = handle_multilevel(req, on_record=lambda r: q.put(("record", r)))
            q.put(("done", response))
        except Exception as exc:  # surfaced to the consumer, not swallowed
            q.put(("error", exc))

    thread = threading.Thread(target=work, daemon=True)
    thread.start()
    while True:
        kind, payload = q.get()
        if kind == "record":
            yield json.dumps({"type": "record", **record_dict(payload)}) + "\n"
        elif kind == "done":
            yield json.dumps({"type": "episodes", "episodes": payload.episodes}) + "\n"
            return
        else:
            yield json.dumps(
                {
                    "type": "error",
                    "detail": str(payload),
                    "kind": getattr(payload, "kind", "error"),
                }
            ) + "\n"
            return


def handle_crashes(req: schemas.CrashesRequest) -> schemas.CrashesResponse:
    series = load_series(req.series)
    if req.resample_to_daily and series.level.spacing < DAILY.spacing:
        series = resample(series, DAILY)
    events = detect_crashes(series, req.threshold, req.horizon_days, req.peak_window)
    summary = crash_summary(events, req.horizon_days)
    return schemas.CrashesResponse(
        events=[
            schemas.EventRow(
                peak_time=e.peak_time,
                peak_price=e.peak_price,
                end_time=e.end_time,
                end_price=e.end_price,
                duration_days=e.duration_days,
                size=e.size,
            )
            for e in events
        ],
        summary=summary_dict(summary),
        config_digest=run_digest(req),
    )


def handle_synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    series = generate_synthetic(
        tc=req.tc,
        m=req.m,
        omega=req.omega,
        A=req.A,
        B=req.B,
        C1=req.C1,
        C2=req.C2,
        n=req.n,
        noise_sd=req.noise_sd,
        seed=req.seed,
        level=parse_level(req.level),
        start_timestamp=req.start_timestamp,
    )
    return schemas.SynthResponse(
        timestamps=[int(t) for t in series.timestamps],
        prices=[float(p) for p in series.prices],
        level=series.level.name,
        params=req.model_dump(),
    )


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)
