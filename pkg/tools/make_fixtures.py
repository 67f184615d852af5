"""Regenerate the bundled data fixtures.

Run from the repository root:

    python tools/make_fixtures.py

Produces, under src/lppls_detect/fixtures/:

  crash_events_2011_2019.csv   historical Bitcoin crash episodes (peak day,
                               peak price, trough day, trough price, duration
                               in days, size in percent)
  btc_daily_2013.csv           daily price path around the April 2013 crash;
                               the peak/trough anchors are historical, the
                               connective days are synthetic but shaped so a
                               peak-to-trough scan recovers the anchors exactly
  btc_daily_2018.csv           same construction around the November 2018
                               crash pair
  synthetic_bubble_1d.csv      pure synthetic super-exponential path with a
                               sidecar JSON of its true parameters
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from lppls_detect.model import generate_synthetic  # noqa: E402
from lppls_detect.series import DAILY, PriceSeries, write_csv  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src" / "lppls_detect" / "fixtures"

# Historical crash list: peak day, peak price, trough day, trough price,
# duration (days), size (%). Dates are US-style month/day/year.
CRASH_ROWS = """\
9/25/2011 6.1 10/9/2011 3.9 14 35.7
10/10/2011 4.5 10/20/2011 2.2 10 50.3
1/10/2012 7.1 1/28/2012 4.9 18 31.2
2/13/2012 5.8 2/18/2012 4.2 5 26.9
8/16/2012 13.4 8/19/2012 8.1 3 39.9
10/10/2012 12.2 10/26/2012 10.0 16 18.3
4/9/2013 229.0 4/16/2013 68.1 7 70.3
4/29/2013 143.3 5/3/2013 98.1 4 31.6
5/29/2013 130.4 6/14/2013 99.0 16 24.0
6/19/2013 105.2 7/6/2013 66.3 17 37.0
10/1/2013 127.3 10/2/2013 103.9 1 18.4
11/18/2013 669.0 11/19/2013 536.0 1 19.9
11/29/2013 1132.0 12/7/2013 693.3 8 38.8
12/10/2013 979.2 12/18/2013 520.0 8 46.9
1/6/2014 919.2 1/27/2014 752.0 21 18.2
2/3/2014 808.5 2/24/2014 535.5 21 33.8
3/5/2014 670.0 3/23/2014 561.0 18 16.3
3/24/2014 586.0 4/10/2014 363.1 17 38.0
4/16/2014 530.0 5/6/2014 428.0 20 19.2
6/3/2014 670.1 6/14/2014 566.6 11 15.5
8/10/2014 591.0 8/18/2014 475.2 8 19.6
8/29/2014 509.3 9/19/2014 395.9 21 22.3
9/23/2014 439.0 10/5/2014 323.5 12 26.3
11/12/2014 426.6 11/21/2014 351.2 9 17.7
12/7/2014 377.3 12/18/2014 312.7 11 17.1
12/26/2014 328.3 1/14/2015 171.4 19 47.8
3/11/2015 296.5 3/24/2015 245.0 13 17.4
4/5/2015 260.5 4/14/2015 215.8 9 17.2
7/28/2015 294.0 8/18/2015 224.8 21 23.5
8/4/2015 285.0 8/24/2015 209.7 20 26.4
11/4/2015 408.0 11/11/2015 309.9 7 24.0
1/9/2016 448.8 1/15/2016 360.0 6 19.8
6/16/2016 766.6 6/22/2016 601.3 6 21.6
7/17/2016 679.5 8/2/2016 540.0 16 20.5
1/4/2017 1114.9 1/11/2017 778.6 7 30.2
3/3/2017 1285.3 3/24/2017 929.1 21 27.7
6/11/2017 2954.2 6/15/2017 2424.9 4 17.9
7/5/2017 2602.9 7/16/2017 1917.6 11 26.3
9/1/2017 4921.7 9/14/2017 3227.8 13 34.4
11/8/2017 7450.3 11/12/2017 5870.4 4 21.2
12/16/2017 19187.8 12/30/2017 12640.0 14 34.1
1/6/2018 17149.7 1/18/2018 11247.6 12 34.4
1/20/2018 12776.0 2/5/2018 6874.3 16 46.2
3/4/2018 11463.3 3/17/2018 7860.8 13 31.4
3/23/2018 8920.8 4/6/2018 6618.3 14 25.8
5/5/2018 9823.3 5/26/2018 7336.0 21 25.3
6/7/2018 7689.3 6/28/2018 5848.3 21 23.9
7/24/2018 8403.8 8/10/2018 6140.0 17 26.9
9/4/2018 7361.0 9/8/2018 6178.3 4 16.1
11/11/2018 6357.5 11/26/2018 3727.3 15 41.4
11/29/2018 4249.8 12/15/2018 3179.5 16 25.2
"""


def _iso(us_date: str) -> str:
    m, d, y = (int(x) for x in us_date.split("/"))
    return f"{y:04d}-{m:02d}-{d:02d}"


def _epoch(iso: str) -> int:
    return int(datetime.fromisoformat(iso + "T00:00:00+00:00").timestamp())


def write_crash_events() -> None:
    rows = []
    for line in CRASH_ROWS.strip().splitlines():
        pd, pp, ed, ep, dur, size = line.split()
        peak_iso, end_iso = _iso(pd), _iso(ed)
        span = (_epoch(end_iso) - _epoch(peak_iso)) // 86_400
        if span != int(dur):
            raise SystemExit(f"duration mismatch for {peak_iso}: {span} != {dur}")
        rows.append((peak_iso, pp, end_iso, ep, dur, size))
    path = OUT / "crash_events_2011_2019.csv"
    with path.open("w") as fh:
        fh.write("# bitcoin crash episodes, September 2011 to April 2019\n")
        fh.write("peak_day,peak_price,end_day,end_price,duration_days,size_pct\n")
        for r in rows:
            fh.write(",".join(str(x) for x in r) + "\n")
    print(f"wrote {path} ({len(rows)} events)")


def _daily_path(
    start_iso: str,
    anchors: dict[str, float],
    segments: list[tuple[str, str, float, float, str]],
    seed: int,
) -> PriceSeries:
    """Assemble a daily series from anchored points joined by shaped segments.

    Each segment (from_day, to_day, from_price, to_price, kind) fills the
    open interval between two anchors: 'rise' and 'fall' interpolate
    geometrically with strictly monotone wiggle-free steps; 'bounce' adds a
    small seeded oscillation while keeping every value strictly between the
    endpoint prices.
    """
    rng = np.random.default_rng(seed)
    days: dict[str, float] = dict(anchors)
    for d0, d1, p0, p1, kind in segments:
        t0, t1 = _epoch(d0), _epoch(d1)
        n = (t1 - t0) // 86_400
        for k in range(1, n):
            f = k / n
            base = p0 * (p1 / p0) ** f
            if kind == "bounce":
                lo, hi = min(p0, p1), max(p0, p1)
                wiggle = 1.0 + 0.06 * np.sin(2.5 * np.pi * f) + 0.01 * rng.standard_normal()
                value = float(np.clip(base * wiggle, lo * 1.02, hi * 0.98))
            else:
                value = base
            day = datetime.fromtimestamp(t0 + k * 86_400, tz=timezone.utc).strftime("%Y-%m-%d")
            days[day] = round(value, 1)
    ordered = sorted(days)
    first = datetime.fromisoformat(start_iso)
    expect = [
        (first + timedelta(days=k)).strftime("%Y-%m-%d") for k in range(len(ordered))
    ]
    if ordered != expect:
        raise SystemExit("daily path has holes: " + str(set(expect) ^ set(ordered)))
    ts = np.array([_epoch(d) for d in ordered], dtype=np.int64)
    px = np.array([days[d] for d in ordered])
    return PriceSeries(timestamps=ts, prices=px, level=DAILY)


def write_daily_2013() -> None:
    series = _daily_path(
        "2013-03-25",
        anchors={
            "2013-03-25": 72.0,
            "2013-04-09": 229.0,  # crash peak
            "2013-04-16": 68.1,  # crash trough
            "2013-04-28": 141.0,
        },
        segments=[
            ("2013-03-25", "2013-04-09", 72.0, 229.0, "rise"),
            ("2013-04-09", "2013-04-16", 229.0, 68.1, "bounce"),
            ("2013-04-16", "2013-04-28", 68.1, 141.0, "rise"),
        ],
        seed=2013,
    )
    path = OUT / "btc_daily_2013.csv"
    write_csv(series, path, header_comment="daily bitcoin prices around the April 2013 crash")
    print(f"wrote {path} ({len(series)} rows)")


def write_daily_2018() -> None:
    series = _daily_path(
        "2018-10-20",
        anchors={
            "2018-10-20": 6125.0,
            "2018-11-11": 6357.5,  # first crash peak
            "2018-11-26": 3727.3,  # first trough
            "2018-11-29": 4249.8,  # rebound peak, second crash
            "2018-12-15": 3179.5,  # second trough
            "2018-12-31": 3820.0,
        },
        segments=[
            ("2018-10-20", "2018-11-11", 6125.0, 6357.5, "rise"),
            ("2018-11-11", "2018-11-26", 6357.5, 3727.3, "bounce"),
            ("2018-11-26", "2018-11-29", 3727.3, 4249.8, "rise"),
            ("2018-11-29", "2018-12-15", 4249.8, 3179.5, "bounce"),
            ("2018-12-15", "2018-12-31", 3179.5, 3820.0, "rise"),
        ],
        seed=2018,
    )
    path = OUT / "btc_daily_2018.csv"
    write_csv(series, path, header_comment="daily bitcoin prices around the November 2018 crashes")
    print(f"wrote {path} ({len(series)} rows)")


def write_synthetic() -> None:
    params = {
        "tc": 520.0,
        "m": 0.45,
        "omega": 8.5,
        "A": 7.5,
        "B": -0.6,
        "C1": 0.03,
        "C2": -0.02,
        "n": 500,
        "noise_sd": 0.004,
        "seed": 11,
    }
    series = generate_synthetic(level=DAILY, start_timestamp=_epoch("2016-01-01"), **params)
    path = OUT / "synthetic_bubble_1d.csv"
    write_csv(series, path, header_comment="synthetic daily super-exponential path")
    (OUT / "synthetic_bubble_1d.json").write_text(json.dumps(params, indent=2) + "\n")
    print(f"wrote {path} ({len(series)} rows) + parameter sidecar")


if __name__ == "__main__":
    write_crash_events()
    write_daily_2013()
    write_daily_2018()
    write_synthetic()
