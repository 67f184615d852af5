"""HTTP API: request plumbing, error mapping, and response shapes.

Runs the FastAPI app in-process via TestClient; optimizer-heavy calls use a
single-restart configuration to stay fast.
"""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

import lppls_detect.multilevel as ml
import lppls_detect.service.handlers as handlers
from lppls_detect import __version__
from lppls_detect.errors import DataError, NoFitError, UsageError
from lppls_detect.indicator import ConfidenceReport
from lppls_detect.model import generate_synthetic
from lppls_detect.series import DAILY, write_csv
from lppls_detect.service.app import create_app
from lppls_detect.service.schemas import ScanRequest, SeriesPayload

FAST = {"cmaes": {"restarts": 1, "max_generations": 200, "tol_fun": 1e-10}}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def bubble_payload():
    series = generate_synthetic(
        tc=87.0, m=0.6, omega=8.0, A=6.0, B=-0.8, C1=0.04, C2=-0.03,
        n=80, noise_sd=0.002, seed=5,
    )
    return {
        "timestamps": [int(t) for t in series.timestamps],
        "prices": [float(p) for p in series.prices],
        "level": "1d",
    }


def flat_payload(level, spacing, n=400):
    return {
        "timestamps": [i * spacing for i in range(n)],
        "prices": [10.0] * n,
        "level": level,
    }


class TestPlumbing:
    def test_load_series_rejects_ambiguous_payload(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(generate_synthetic(tc=60, m=0.5, omega=9.0, A=5.0, B=-0.6, n=50), p)
        with pytest.raises(UsageError, match="not both"):
            handlers.load_series(
                SeriesPayload(path=str(p), timestamps=[0], prices=[1.0])
            )
        with pytest.raises(UsageError, match="needs a path"):
            handlers.load_series(SeriesPayload(timestamps=[0, 86400]))

    def test_load_series_from_path(self, tmp_path):
        p = tmp_path / "x.csv"
        series = generate_synthetic(tc=60, m=0.5, omega=9.0, A=5.0, B=-0.6, n=50)
        write_csv(series, p)
        loaded = handlers.load_series(SeriesPayload(path=str(p)))
        assert np.allclose(loaded.prices, series.prices)

    def test_resolve_endpoint(self):
        series = generate_synthetic(
            tc=60, m=0.5, omega=9.0, A=5.0, B=-0.6, n=50,
            start_timestamp=1577836800,  # 2020-01-01
        )
        assert handlers.resolve_endpoint(series, None, 7) == 7
        assert handlers.resolve_endpoint(series, 12, 0) == 12
        assert handlers.resolve_endpoint(series, "2020-01-10", 0) == 9
        with pytest.raises(UsageError):
            handlers.resolve_endpoint(series, True, 0)
        with pytest.raises(UsageError, match="outside"):
            handlers.resolve_endpoint(series, 50, 0)
        with pytest.raises(UsageError, match="bad endpoint"):
            handlers.resolve_endpoint(series, "not-a-date", 0)
        with pytest.raises(DataError):
            handlers.resolve_endpoint(series, "2050-01-01", 0)

    def test_run_digest_ignores_workers(self, bubble_payload):
        base = dict(series=bubble_payload, schedule=(30, 60, 10))
        one = ScanRequest(**base, options={"workers": 1})
        two = ScanRequest(**base, options={"workers": 2})
        assert handlers.run_digest(one) == handlers.run_digest(two)
        reseeded = ScanRequest(**base, options={"workers": 1, "seed": 9})
        assert handlers.run_digest(one) != handlers.run_digest(reseeded)


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}


class TestFit:
    def test_fit_recovers_synthetic(self, client, bubble_payload):
        resp = client.post("/fit", json={"series": bubble_payload, "options": FAST})
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["fit"]["tc"] == pytest.approx(87.0, abs=1.0)
        assert body["fit"]["B"] < 0
        assert len(body["curve"]["fitted"]) == 80
        assert set(body["verdict"]) >= {"m_ok", "passed", "lomb_p"}

    def test_no_fit_reported_in_band(self, client, bubble_payload, monkeypatch):
        def refuse(*a, **kw):
            raise NoFitError("all restarts diverged")

        monkeypatch.setattr(handlers, "fit_window", refuse)
        resp = client.post("/fit", json={"series": bubble_payload, "options": FAST})
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "no_fit"
        assert "diverged" in body["detail"]
        assert body["fit"] is None

    def test_bad_endpoint_is_400(self, client, bubble_payload):
        resp = client.post(
            "/fit", json={"series": bubble_payload, "t2": 999, "options": FAST}
        )
        assert resp.status_code == 400
        assert resp.json()["kind"] == "usage"

    def test_unknown_date_is_400_data(self, client, bubble_payload):
        resp = client.post(
            "/fit", json={"series": bubble_payload, "t2": "2050-01-01", "options": FAST}
        )
        assert resp.status_code == 400
        assert resp.json()["kind"] == "data"

    def test_malformed_body_is_422(self, client):
        resp = client.post("/fit", json={"t2": 5})
        assert resp.status_code == 422


class TestScan:
    def scan_body(self, payload, **extra):
        body = {
            "series": payload,
            "schedule": [30, 60, 10],
            "t2_start": 79,
            "t2_stop": 79,
            "options": FAST,
        }
        body.update(extra)
        return body

    def test_rows_and_digest(self, client, bubble_payload):
        resp = client.post("/scan", json=self.scan_body(bubble_payload))
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["rows"]) == 1
        row = body["rows"][0]
        assert row["n_windows"] == 4
        assert row["schedule_tag"] == "benchmark"
        assert row["n_pass_pos"] >= 1  # a clean bubble qualifies
        assert len(body["config_digest"]) == 12

    def test_worker_count_never_changes_results(self, client, bubble_payload):
        serial = client.post("/scan", json=self.scan_body(bubble_payload)).json()
        opts = dict(FAST, workers=2)
        pooled = client.post("/scan", json=self.scan_body(bubble_payload, options=opts)).json()
        assert pooled["rows"] == serial["rows"]
        assert pooled["config_digest"] == serial["config_digest"]

    def test_unformable_endpoints_are_skipped(self, client, bubble_payload):
        body = self.scan_body(bubble_payload, t2_start=20, t2_stop=20)
        resp = client.post("/scan", json=body)
        assert resp.status_code == 200
        assert resp.json()["rows"] == []
        assert resp.json()["skipped"] == [20]

    def test_inline_and_path_agree(self, client, bubble_payload, tmp_path):
        p = tmp_path / "series.csv"
        series = handlers.load_series(SeriesPayload(**bubble_payload))
        write_csv(series, p)
        inline = client.post("/scan", json=self.scan_body(bubble_payload)).json()
        by_path = client.post(
            "/scan", json=self.scan_body({"path": str(p), "level": "1d"})
        ).json()
        assert by_path["rows"] == inline["rows"]


def canned_confidence(table):
    def stub(series, t2_index, schedule, config, tag="benchmark", *a, **kw):
        t = int(series.timestamps[t2_index])
        pos, neg = table.get((series.level.name, t), (0, 0))
        return ConfidenceReport(
            t2=t, t2_index=t2_index, level_name=series.level.name, schedule_tag=tag,
            n_windows=125, n_pass_pos=pos, n_pass_neg=neg,
        )

    return stub


class TestMultilevel:
    def body(self):
        return {
            "feeds": [flat_payload("1h", 3600), flat_payload("30m", 1800)],
            "plan": {
                "levels": [
                    {"level": "1h", "schedule": [30, 60, 10], "trigger": 0.2},
                    {"level": "30m", "schedule": [30, 60, 10], "trigger": 0.5},
                ]
            },
            "t2_start": 50,
            "t2_stop": 52,
        }

    def table(self):
        h, hh = 3600, 1800
        return {("1h", 50 * h): (50, 0), ("30m", 50 * h - hh): (70, 0)}

    def test_records_and_episodes(self, client, monkeypatch):
        monkeypatch.setattr(ml, "confidence_at", canned_confidence(self.table()))
        resp = client.post("/multilevel", json=self.body())
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["records"]) == 5  # 3 benchmark + 2 escalated
        ep = body["episodes"][0]
        assert ep["level"] == "30m"
        assert ep["n_records"] == 2
        assert ep["trigger_time"].startswith("1970-01-03T02:00")

    def test_stream_yields_records_then_episodes(self, client, monkeypatch):
        monkeypatch.setattr(ml, "confidence_at", canned_confidence(self.table()))
        with client.stream("POST", "/multilevel/stream", json=self.body()) as resp:
            assert resp.status_code == 200
            lines = [json.loads(l) for l in resp.iter_lines() if l]
        assert [l["type"] for l in lines] == ["record"] * 5 + ["episodes"]
        assert lines[0]["level"] == "1h"
        assert lines[1]["level"] == "30m"  # escalation interleaves in emit order
        assert lines[-1]["episodes"][0]["level"] == "30m"

    def test_bad_plan_is_400_config(self, client):
        body = self.body()
        body["plan"]["levels"] = body["plan"]["levels"][::-1]  # fine before coarse
        resp = client.post("/multilevel", json=body)
        assert resp.status_code == 400
        assert resp.json()["kind"] == "config"

    def test_stream_surfaces_errors_in_band(self, client):
        body = self.body()
        body["plan"]["levels"] = body["plan"]["levels"][::-1]
        with client.stream("POST", "/multilevel/stream", json=body) as resp:
            lines = [json.loads(l) for l in resp.iter_lines() if l]
        assert lines == [
            {"type": "error", "detail": lines[0]["detail"], "kind": "config"}
        ]
        assert "finer" in lines[0]["detail"]


class TestCrashes:
    def crash_payload(self):
        rise = np.linspace(50, 100, 11)
        fall = [90.0, 80.0, 70.0, 60.0]
        recover = np.linspace(65, 95, 7)
        prices = np.concatenate([rise, fall, recover])
        return {
            "timestamps": [i * 86400 for i in range(len(prices))],
            "prices": [float(p) for p in prices],
            "level": "1d",
        }

    def test_events_and_summary(self, client):
        resp = client.post("/crashes", json={"series": self.crash_payload()})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["events"]) == 1
        e = body["events"][0]
        assert e["peak_price"] == 100.0 and e["end_price"] == 60.0
        assert e["duration_days"] == 4
        assert body["summary"]["n_events"] == 1
        assert list(body["summary"]["by_year"]) == ["1970"]

    def test_subdaily_needs_resample_flag(self, client):
        daily = self.crash_payload()
        hourly = {
            "timestamps": [i * 3600 for i in range(len(daily["prices"]) * 24)],
            "prices": [p for p in daily["prices"] for _ in range(24)],
            "level": "1h",
        }
        refused = client.post("/crashes", json={"series": hourly})
        assert refused.status_code == 400
        assert refused.json()["kind"] == "data"

        ok = client.post(
            "/crashes", json={"series": hourly, "resample_to_daily": True}
        )
        assert ok.status_code == 200
        assert ok.json()["events"][0]["peak_price"] == 100.0

    def test_bundled_fixture_via_path(self, client, fixtures_dir):
        resp = client.post(
            "/crashes",
            json={"series": {"path": str(fixtures_dir / "btc_daily_2013.csv")}},
        )
        body = resp.json()
        assert body["events"][0]["peak_price"] == 229.0
        assert body["events"][0]["end_price"] == 68.1


class TestSynth:
    def test_round_trip(self, client):
        resp = client.post("/synth", json={"tc": 60.0, "n": 50, "seed": 3})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["timestamps"]) == 50
        assert body["level"] == "1d"
        assert all(p > 0 for p in body["prices"])
        assert body["params"]["tc"] == 60.0

    def test_invalid_params_mapped_to_400(self, client):
        resp = client.post("/synth", json={"tc": 10.0, "n": 50})
        assert resp.status_code == 400
        assert resp.json()["kind"] == "usage"
