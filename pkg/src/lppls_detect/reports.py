"""Machine-readable output: CSV and JSON writers for scan results.

Every CSV starts with a provenance comment (tool version plus a digest of
the generating configuration) so an output file can always be traced back
to the run that made it. Floats are written with repr so files
round-trip bit-identically and reruns can be compared by checksum.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .crashes import CrashEvent, CrashSummary
from .errors import DataError
from .indicator import ConfidenceReport
from .multilevel import Episode, InstantRecord, MultilevelTrace
from .series import to_iso


def config_digest(config) -> str:
    """Twelve hex chars identifying a configuration object.

    Nested dataclasses are serialized to canonical JSON first, so equal
    configurations digest equally regardless of construction order.
    """
    if is_dataclass(config) and not isinstance(config, type):
        payload = asdict(config)
    else:
        payload = config
    blob = json.dumps(payload, sort_keys=True, default=repr).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def provenance_line(config) -> str:
    """Header comment for output files. Accepts a config object or a
    precomputed digest string (so remote responses can reuse theirs)."""
    digest = config if isinstance(config, str) else config_digest(config)
    return f"# lppls-detect {__version__} config={digest}"


def _fmt(value: float) -> str:
    return repr(float(value))


def write_reports_csv(reports: list[ConfidenceReport], path: str | Path, config=None) -> None:
    """One row per report: t2 (ISO-8601), level, n_windows, ci_pos, ci_neg."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(provenance_line(config) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["t2", "level", "n_windows", "ci_pos", "ci_neg"])
        for r in reports:
            writer.writerow(
                [to_iso(r.t2), r.level_name, r.n_windows, _fmt(r.ci_pos), _fmt(r.ci_neg)]
            )


def report_detail(report: ConfidenceReport) -> dict:
    """Full per-window breakdown of one report, JSON-ready."""
    windows = []
    for wr in report.per_window:
        entry: dict = {
            "t1_index": wr.window.t1_index,
            "t2_index": wr.window.t2_index,
            "passed": wr.passed,
        }
        if wr.fit is not None:
            f = wr.fit
            entry["fit"] = {
                "tc": f.tc,
                "m": f.m,
                "omega": f.omega,
                "A": f.A,
                "B": f.B,
                "C1": f.C1,
                "C2": f.C2,
                "ssr": f.ssr,
                "converged": f.converged,
            }
        if wr.verdict is not None:
            v = wr.verdict
            entry["verdict"] = {
                "m_ok": v.m_ok,
                "omega_ok": v.omega_ok,
                "tc_ok": v.tc_ok,
                "oscillation_ok": v.oscillation_ok,
                "damping_ok": v.damping_ok,
                "rel_err_ok": v.rel_err_ok,
                "lomb_ok": v.lomb_ok,
                "ar1_ok": v.ar1_ok,
                "damping": v.damping,
                "half_periods": v.half_periods,
                "max_rel_err_observed": v.max_rel_err_observed,
                "lomb_p": v.lomb_p,
                "pp_stat": v.pp_stat,
                "df_stat": v.df_stat,
            }
        if wr.error is not None:
            entry["error"] = wr.error
        windows.append(entry)
    return {
        "t2": to_iso(report.t2),
        "level": report.level_name,
        "schedule_tag": report.schedule_tag,
        "n_windows": report.n_windows,
        "n_pass_pos": report.n_pass_pos,
        "n_pass_neg": report.n_pass_neg,
        "ci_pos": report.ci_pos,
        "ci_neg": report.ci_neg,
        "windows": windows,
    }


def write_reports_json(reports: list[ConfidenceReport], path: str | Path, config=None) -> None:
    path = Path(path)
    doc = {
        "tool": f"lppls-detect {__version__}",
        "config_digest": config_digest(config),
        "reports": [report_detail(r) for r in reports],
    }
    path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n")


def record_dict(record: InstantRecord) -> dict:
    return {
        "time": to_iso(record.time),
        "level": record.level_name,
        "ci_pos": record.ci_pos,
        "ci_neg": record.ci_neg,
        "triggered": record.triggered,
    }


def write_trace_csv(trace: MultilevelTrace, path: str | Path, config=None) -> None:
    """Instant records, one row each, in evaluation order."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(provenance_line(config) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["time", "level", "ci_pos", "ci_neg", "triggered"])
        for r in trace.records:
            writer.writerow(
                [to_iso(r.time), r.level_name, _fmt(r.ci_pos), _fmt(r.ci_neg), r.triggered]
            )


def episode_dict(episode: Episode) -> dict:
    return {
        "level": episode.level_name,
        "trigger_time": to_iso(episode.trigger_time),
        "start_time": None if episode.start_time is None else to_iso(episode.start_time),
        "end_time": None if episode.end_time is None else to_iso(episode.end_time),
        "truncated": episode.truncated,
        "n_records": episode.n_records,
        "children": [episode_dict(c) for c in episode.children],
    }


def write_episodes_json(trace: MultilevelTrace, path: str | Path, config=None) -> None:
    path = Path(path)
    doc = {
        "tool": f"lppls-detect {__version__}",
        "config_digest": config_digest(config),
        "episodes": [episode_dict(e) for e in trace.episodes],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


EVENT_COLUMNS = ["peak_day", "peak_price", "end_day", "end_price", "duration_days", "size_pct"]


def write_events_csv(events: list[CrashEvent], path: str | Path, config=None) -> None:
    """Crash events, one row each, dates ISO, size in percent to one decimal."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(provenance_line(config) + "\n")
        writer = csv.writer(fh)
        writer.writerow(EVENT_COLUMNS)
        for e in events:
            writer.writerow(
                [
                    to_iso(e.peak_time),
                    _fmt(e.peak_price),
                    to_iso(e.end_time),
                    _fmt(e.end_price),
                    e.duration_days,
                    f"{e.size * 100:.1f}",
                ]
            )


def read_events_csv(path: str | Path) -> list[CrashEvent]:
    """Load a crash-event CSV (comment lines ignored). Dates may be ISO days
    or full ISO timestamps."""
    path = Path(path)
    events = []
    with path.open() as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for i, row in enumerate(reader):
            try:
                events.append(
                    CrashEvent(
                        peak_time=_parse_day(row["peak_day"]),
                        peak_price=float(row["peak_price"]),
                        end_time=_parse_day(row["end_day"]),
                        end_price=float(row["end_price"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise DataError(f"bad event row {i + 1} in {path}: {exc}") from exc
    return events


def _parse_day(text: str) -> int:
    text = text.strip()
    if "T" not in text:
        text += "T00:00:00+00:00"
    elif text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def summary_dict(summary: CrashSummary) -> dict:
    return {
        "n_events": summary.n_events,
        "by_year": {str(y): c for y, c in summary.by_year.items()},
        "size_bins_pct": {
            f"{5 * k}-{5 * (k + 1)}": c for k, c in enumerate(summary.size_bins) if c
        },
        "n_large": summary.n_large,
        "large_fraction": summary.large_fraction,
        "duration_min": summary.duration_min,
        "duration_median": summary.duration_median,
        "duration_max": summary.duration_max,
    }


def write_summary_json(summary: CrashSummary, path: str | Path, config=None) -> None:
    path = Path(path)
    doc = {
        "tool": f"lppls-detect {__version__}",
        "config_digest": config_digest(config),
        "summary": summary_dict(summary),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
