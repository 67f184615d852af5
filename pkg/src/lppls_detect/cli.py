"""Command-line entry points.

Every command builds a request model and passes it to the matching handler,
either in-process (the default) or over HTTP when --server is given, so the
two modes produce identical files. Defaults can be preloaded from a TOML
file via --config or the LPPLS_CONFIG environment variable; explicit flags
always win.
"""

from __future__ import annotations

import json
import os
import sys
import types
from pathlib import Path

import click
import httpx
import tomli

from . import __version__
from .errors import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NO_FIT,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    DataError,
    LpplsError,
    NoFitError,
    UsageError,
)
from .reports import write_events_csv, write_reports_csv, write_trace_csv
from .series import PriceSeries, parse_level, to_iso, write_csv
from .service import handlers, schemas

_EXC_BY_KIND = {
    "usage": UsageError,
    "data": DataError,
    "config": ConfigError,
    "no_fit": NoFitError,
}

_EXIT_BY_KIND = {
    "usage": EXIT_USAGE,
    "data": EXIT_DATA,
    "config": EXIT_CONFIG,
    "no_fit": EXIT_NO_FIT,
}


def _load_config(ctx: click.Context, param, value):
    path = value or os.environ.get("LPPLS_CONFIG")
    if not path:
        return None
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    ctx.default_map = {**(ctx.default_map or {}), **data}
    return path


@click.group()
@click.version_option(__version__, prog_name="lppls")
@click.option(
    "--config",
    type=click.Path(),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="TOML file with per-command flag defaults.",
)
@click.option("--server", envvar="LPPLS_SERVER", default=None, help="Run against a remote service URL instead of in-process.")
@click.pass_context
def cli(ctx, server):
    """Bubble-indicator toolkit: calibrate, scan, monitor, and measure crashes."""
    ctx.obj = {"server": server}


def _endpoint(text: str | None) -> int | str | None:
    """Endpoints on the command line: sample index or ISO date."""
    if text is None:
        return None
    text = text.strip()
    return int(text) if text.lstrip("-").isdigit() else text


def _schedule(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        parts = ()
    if len(parts) != 3:
        raise UsageError(f"schedule must be min,max,step integers, got {text!r}")
    return parts


def _series_payload(data: str, level: str) -> schemas.SeriesPayload:
    return schemas.SeriesPayload(path=data, level=level)


def _call(ctx, path: str, req, handler, response_model):
    """Dispatch one request in-process or to --server; same model back."""
    server = ctx.obj.get("server")
    if not server:
        return handler(req)
    resp = httpx.post(server.rstrip("/") + path, json=req.model_dump(), timeout=None)
    if resp.status_code == 400:
        body = resp.json()
        exc_type = _EXC_BY_KIND.get(body.get("kind"), LpplsError)
        raise exc_type(body.get("detail", "server rejected the request"))
    resp.raise_for_status()
    return response_model.model_validate(resp.json())


@cli.command("fit")
@click.option("--data", required=True, type=click.Path(), help="CSV with timestamp,price columns.")
@click.option("--level", default="1d", show_default=True, help="Series timescale (1d, 1h, 30m, or <seconds>s).")
@click.option("--t1", default=None, help="Window start: sample index or ISO date (default: first sample).")
@click.option("--t2", default=None, help="Window end: sample index or ISO date (default: last sample).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(), default=None, help="Write the full response as JSON.")
@click.pass_context
def cmd_fit(ctx, data, level, t1, t2, seed, out):
    """Calibrate one window and run the qualification battery on it."""
    req = schemas.FitRequest(
        series=_series_payload(data, level),
        t1=_endpoint(t1),
        t2=_endpoint(t2),
        options=schemas.Options(seed=seed),
    )
    resp = _call(ctx, "/fit", req, handlers.handle_fit, schemas.FitResponse)
    if out:
        Path(out).write_text(resp.model_dump_json(indent=2) + "\n")
    if resp.status == "no_fit":
        raise NoFitError(resp.detail or "no feasible fit for this window")
    f, v = resp.fit, resp.verdict
    click.echo(f"tc={f.tc:.4f}  m={f.m:.4f}  omega={f.omega:.4f}  ssr={f.ssr:.6g}")
    click.echo(f"A={f.A:.4f}  B={f.B:.4f}  C1={f.C1:.5f}  C2={f.C2:.5f}  converged={f.converged}")
    checks = ["m", "omega", "tc", "oscillation", "damping", "rel_err", "lomb", "ar1"]
    flags = "  ".join(f"{name}={getattr(v, name + '_ok')}" for name in checks)
    click.echo(flags)
    click.echo(f"qualified: {v.passed}")


@cli.command("scan")
@click.option("--data", required=True, type=click.Path())
@click.option("--level", default="1d", show_default=True)
@click.option("--t2-start", "--from", "t2_start", default=None, help="First endpoint (index or ISO date).")
@click.option("--t2-stop", "--to", "t2_stop", default=None, help="Last endpoint (index or ISO date).")
@click.option("--stride", default=1, show_default=True, type=int)
@click.option("--schedule", default="30,650,5", show_default=True, help="Window lengths min,max,step.")
@click.option("--split-horizon", is_flag=True, help="Also report short/long window halves separately.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--out", type=click.Path(), default=None, help="Write indicator rows as CSV.")
@click.option("--json", "json_out", type=click.Path(), default=None, help="Write per-window detail as JSON.")
@click.pass_context
def cmd_scan(ctx, data, level, t2_start, t2_stop, stride, schedule, split_horizon, seed, workers, out, json_out):
    """Confidence indicators over a range of endpoints."""
    req = schemas.ScanRequest(
        series=_series_payload(data, level),
        t2_start=_endpoint(t2_start),
        t2_stop=_endpoint(t2_stop),
        stride=stride,
        schedule=_schedule(schedule),
        split_horizon=split_horizon,
        detail=json_out is not None,
        options=schemas.Options(seed=seed, workers=workers),
    )
    resp = _call(ctx, "/scan", req, handlers.handle_scan, schemas.ScanResponse)
    if resp.skipped:
        click.echo(f"skipped {len(resp.skipped)} endpoints with too little history", err=True)
    if out:
        write_reports_csv(resp.rows, out, resp.config_digest)
        if split_horizon:
            stem = Path(out)
            write_reports_csv(resp.short_rows or [], stem.with_name(stem.stem + "_short" + stem.suffix), resp.config_digest)
            write_reports_csv(resp.long_rows or [], stem.with_name(stem.stem + "_long" + stem.suffix), resp.config_digest)
    else:
        for row in resp.rows:
            click.echo(f"{to_iso(row.t2)}  {row.level_name}  ci_pos={row.ci_pos:.4f}  ci_neg={row.ci_neg:.4f}")
    if json_out:
        Path(json_out).write_text(json.dumps(resp.detail_reports or [], indent=2) + "\n")


@cli.command("multilevel")
@click.option("--data", "feeds", multiple=True, required=True, type=click.Path(), help="One CSV per level, coarsest first.")
@click.option(
    "--level-spec",
    "level_specs",
    multiple=True,
    required=True,
    help="One per feed: LEVEL:MIN,MAX,STEP:TRIGGER, e.g. 1d:30,650,5:0.1",
)
@click.option("--zero-run", default=1, show_default=True, type=int, help="Consecutive zero readings that close an episode.")
@click.option("--trigger-on", default="max", show_default=True, type=click.Choice(["max", "pos"]))
@click.option("--t2-start", "--from", "t2_start", default=None)
@click.option("--t2-stop", "--to", "t2_stop", default=None)
@click.option("--stride", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--follow", is_flag=True, help="Stream records as NDJSON to stdout instead of writing files.")
@click.option("--trace", type=click.Path(), default=None, help="Write instant records as CSV.")
@click.option("--episodes", "episodes_out", type=click.Path(), default=None, help="Write episode tree as JSON.")
@click.pass_context
def cmd_multilevel(ctx, feeds, level_specs, zero_run, trigger_on, t2_start, t2_stop, stride, seed, workers, follow, trace, episodes_out):
    """Monitor the coarsest feed and escalate into finer ones on triggers."""
    if len(feeds) != len(level_specs):
        raise UsageError(f"{len(feeds)} feed(s) but {len(level_specs)} level-spec(s)")
    if follow and (trace or episodes_out):
        raise UsageError("--follow streams to stdout; drop --trace/--episodes")
    levels = []
    for spec in level_specs:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad level spec {spec!r}, want LEVEL:MIN,MAX,STEP:TRIGGER")
        try:
            trigger = float(parts[2])
        except ValueError as exc:
            raise UsageError(f"bad trigger in level spec {spec!r}") from exc
        levels.append(
            schemas.LevelOptions(level=parts[0], schedule=_schedule(parts[1]), trigger=trigger)
        )
    req = schemas.MultilevelRequest(
        feeds=[_series_payload(f, lv.level) for f, lv in zip(feeds, levels)],
        plan=schemas.PlanOptions(levels=levels, zero_run=zero_run, trigger_on=trigger_on),
        t2_start=_endpoint(t2_start),
        t2_stop=_endpoint(t2_stop),
        stride=stride,
        options=schemas.Options(seed=seed, workers=workers),
    )

    if follow:
        server = ctx.obj.get("server")
        if server:
            with httpx.stream(
                "POST", server.rstrip("/") + "/multilevel/stream", json=req.model_dump(), timeout=None
            ) as resp:
                resp.raise_for_status()
                for line in resp.iter_lines():
                    if line:
                        click.echo(line)
        else:
            for line in handlers.iter_multilevel(req):
                click.echo(line.rstrip("\n"))
        return

    resp = _call(ctx, "/multilevel", req, handlers.handle_multilevel, schemas.MultilevelResponse)
    if trace:
        write_trace_csv(types.SimpleNamespace(records=resp.records), trace, resp.config_digest)
    if episodes_out:
        doc = {
            "tool": f"lppls-detect {__version__}",
            "config_digest": resp.config_digest,
            "episodes": resp.episodes,
        }
        Path(episodes_out).write_text(json.dumps(doc, indent=2) + "\n")
    n_triggers = sum(1 for r in resp.records if r.triggered)
    click.echo(
        f"{len(resp.records)} records, {n_triggers} trigger readings, {len(resp.episodes)} episodes"
    )


@cli.command("crashes")
@click.option("--data", required=True, type=click.Path())
@click.option("--level", default="1d", show_default=True)
@click.option("--threshold", default=0.15, show_default=True, type=float, help="Minimum drop (fraction of peak).")
@click.option("--horizon", default=21, show_default=True, type=int, help="Days after a peak to search for the trough.")
@click.option("--peak-window", default=2, show_default=True, type=int)
@click.option("--resample-to-daily", is_flag=True, help="Aggregate finer series to daily closes first.")
@click.option("--events", "events_out", type=click.Path(), default=None, help="Write events as CSV.")
@click.option("--summary", "summary_out", type=click.Path(), default=None, help="Write summary statistics as JSON.")
@click.pass_context
def cmd_crashes(ctx, data, level, threshold, horizon, peak_window, resample_to_daily, events_out, summary_out):
    """Find peak-to-trough drops beyond a threshold and summarize them."""
    req = schemas.CrashesRequest(
        series=_series_payload(data, level),
        threshold=threshold,
        horizon_days=horizon,
        peak_window=peak_window,
        resample_to_daily=resample_to_daily,
    )
    resp = _call(ctx, "/crashes", req, handlers.handle_crashes, schemas.CrashesResponse)
    if events_out:
        write_events_csv(resp.events, events_out, resp.config_digest)
    if summary_out:
        doc = {
            "tool": f"lppls-detect {__version__}",
            "config_digest": resp.config_digest,
            "summary": resp.summary,
        }
        Path(summary_out).write_text(json.dumps(doc, indent=2) + "\n")
    for e in resp.events:
        click.echo(
            f"{to_iso(e.peak_time)}  {e.peak_price:.2f} -> {e.end_price:.2f}"
            f"  {e.size * 100:.1f}% in {e.duration_days}d"
        )
    click.echo(f"{resp.summary['n_events']} events, by year {resp.summary['by_year']}")


@cli.command("synth")
@click.option("--tc", required=True, type=float, help="Critical time in samples past the first point.")
@click.option("--m", default=0.5, show_default=True, type=float)
@click.option("--omega", default=9.0, show_default=True, type=float)
@click.option("--A", "a_", default=8.0, show_default=True, type=float)
@click.option("--B", "b_", default=-1.0, show_default=True, type=float)
@click.option("--C1", "c1", default=0.0, show_default=True, type=float)
@click.option("--C2", "c2", default=0.0, show_default=True, type=float)
@click.option("--n", default=500, show_default=True, type=int)
@click.option("--noise-sd", default=0.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--level", default="1d", show_default=True)
@click.option("--start", default=0, show_default=True, type=int, help="Timestamp of the first sample (epoch seconds).")
@click.option("--out", required=True, type=click.Path(), help="CSV to write; a .json sidecar records the parameters.")
@click.pass_context
def cmd_synth(ctx, tc, m, omega, a_, b_, c1, c2, n, noise_sd, seed, level, start, out):
    """Generate a noisy model path for experiments and tests."""
    req = schemas.SynthRequest(
        tc=tc, m=m, omega=omega, A=a_, B=b_, C1=c1, C2=c2,
        n=n, noise_sd=noise_sd, seed=seed, level=level, start_timestamp=start,
    )
    resp = _call(ctx, "/synth", req, handlers.handle_synth, schemas.SynthResponse)
    series = PriceSeries(
        timestamps=resp.timestamps, prices=resp.prices, level=parse_level(resp.level)
    )
    write_csv(series, out, header_comment="synthetic model path")
    sidecar = Path(out).with_suffix(".json")
    sidecar.write_text(json.dumps(resp.params, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {n} samples to {out}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli(args=argv, standalone_mode=False, obj={})
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code or EXIT_USAGE
    except LpplsError as exc:
        click.echo(f"error: {exc}", err=True)
        return _EXIT_BY_KIND.get(exc.kind, 1)
    except httpx.HTTPError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
