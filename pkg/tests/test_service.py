import pytest

from uba.storage import MemoryStore

from conftest import make_service

DAY_MS = 86_400_000
HOUR_MS = 3_600_000

# fixed "now" far past every simulated timestamp, so client clocks are honored
NOW_MS = 2_000_000_000_000
BASE = 1000 * DAY_MS  # 00:00 UTC

KEY = {"X-API-Key": "key-1"}

DHAKA_IP = "10.10.0.1"
TOKYO_IP = "10.50.0.1"
AMSTERDAM_IP = "10.30.0.1"
VPN_IP = "10.70.0.1"


class FakeClock:
    def __init__(self, value=0.0):
        self.value = value

    def __call__(self):
        return self.value


@pytest.fixture
def svc(demo_geoip):
    return make_service(demo_geoip, clock_ms=lambda: NOW_MS)


def start(client, user="u1", fp=None, ip=DHAKA_IP, ts=BASE, key=KEY):
    body = {"user_id": user, "fingerprint": fp or {"ua": "Firefox Desktop"},
            "ip": ip, "client_ts": ts}
    return client.post("/v1/sessions", json=body, headers=key)


def drain(client, key=KEY):
    r = client.post("/v1/_drain", headers=key)
    assert r.status_code == 200
    return r.json()["processed"]


def submit_events(client, sid, events, key=KEY):
    return client.post(f"/v1/sessions/{sid}/events", json={"events": events},
                       headers=key)


def end(client, sid, ts, key=KEY):
    return client.post(f"/v1/sessions/{sid}/end", json={"client_ts": ts}, headers=key)


def get_session(client, sid, key=KEY):
    r = client.get("/v1/sessions", params={"page_size": 1000}, headers=key)
    assert r.status_code == 200
    for doc in r.json()["sessions"]:
        if doc["session_id"] == sid:
            return doc
    return None


class TestAuth:
    def test_missing_key_401(self, svc):
        _, _, client = svc
        r = client.post("/v1/sessions", json={"user_id": "u", "fingerprint": {"ua": "x"}})
        assert r.status_code == 401
        assert r.json()["error"] == "unauthorized"

    def test_wrong_key_401(self, svc):
        _, _, client = svc
        r = start(client, key={"X-API-Key": "nope"})
        assert r.status_code == 401

    def test_all_endpoints_guarded(self, svc):
        _, _, client = svc
        for method, path in [
            ("get", "/v1/sessions"), ("get", "/v1/suspicious"),
            ("get", "/v1/config/rules"), ("get", "/v1/analytics/summary"),
        ]:
            assert getattr(client, method)(path).status_code == 401


class TestRateLimit:
    def test_burst_capacity_then_429(self, demo_geoip):
        clock = FakeClock(100.0)
        _, _, client = make_service(
            demo_geoip, tenants=(("t1", "key-1", 2),),
            clock_ms=lambda: NOW_MS, bucket_clock=clock,
        )
        # capacity is twice the per-second rate
        codes = [start(client, user=f"u{i}").status_code for i in range(5)]
        assert codes == [202, 202, 202, 202, 429]
        body = client.post("/v1/sessions", json={"user_id": "u", "fingerprint": {"ua": "x"}},
                           headers=KEY).json()
        assert body["error"] == "rate_limited"

    def test_refills_with_time(self, demo_geoip):
        clock = FakeClock(100.0)
        _, _, client = make_service(
            demo_geoip, tenants=(("t1", "key-1", 2),),
            clock_ms=lambda: NOW_MS, bucket_clock=clock,
        )
        for i in range(4):
            assert start(client, user=f"u{i}").status_code == 202
        assert start(client).status_code == 429
        clock.value += 1.0  # one second -> two more tokens
        assert start(client).status_code == 202
        assert start(client).status_code == 202
        assert start(client).status_code == 429

    def test_limits_are_per_tenant(self, demo_geoip):
        clock = FakeClock(0.0)
        _, _, client = make_service(
            demo_geoip, tenants=(("t1", "key-1", 2), ("t2", "key-2", 100)),
            clock_ms=lambda: NOW_MS, bucket_clock=clock,
        )
        for i in range(4):
            start(client, user=f"u{i}")
        assert start(client).status_code == 429
        assert start(client, key={"X-API-Key": "key-2"}).status_code == 202


class TestValidation:
    def test_empty_user_id(self, svc):
        _, _, client = svc
        r = client.post("/v1/sessions", json={"user_id": "", "fingerprint": {"ua": "x"}},
                        headers=KEY)
        assert r.status_code == 400 and r.json()["field"] == "user_id"

    def test_empty_fingerprint(self, svc):
        _, _, client = svc
        r = client.post("/v1/sessions", json={"user_id": "u", "fingerprint": {}},
                        headers=KEY)
        assert r.status_code == 400 and r.json()["field"] == "fingerprint"

    def test_bad_event_kind(self, svc):
        _, _, client = svc
        sid = start(client).json()["session_id"]
        r = submit_events(client, sid, [{"event_id": "e1", "kind": "PageView", "ts": BASE}])
        assert r.status_code == 400 and r.json()["field"] == "kind"

    def test_batch_over_500_rejected(self, svc):
        _, _, client = svc
        sid = start(client).json()["session_id"]
        events = [{"event_id": f"e{i}", "kind": "page_view", "ts": BASE} for i in range(501)]
        r = submit_events(client, sid, events)
        assert r.status_code == 400 and r.json()["field"] == "events"

    def test_events_for_unknown_session_404(self, svc):
        _, _, client = svc
        r = submit_events(client, "s-99999999", [{"event_id": "e1", "kind": "page_view"}])
        assert r.status_code == 404

    def test_end_unknown_session_404(self, svc):
        _, _, client = svc
        assert end(client, "s-99999999", BASE).status_code == 404

    def test_future_client_ts_clamped(self, svc):
        store, _, client = svc
        sid = start(client, ts=NOW_MS + HOUR_MS).json()["session_id"]
        drain(client)
        doc = store.get("sessions", "t1", sid)
        assert doc["login_time"] == NOW_MS + 5 * 60 * 1000


class TestLifecycle:
    def test_start_returns_202_and_sequential_ids(self, svc):
        _, _, client = svc
        r1, r2 = start(client), start(client)
        assert r1.status_code == 202 and r1.json() == {"session_id": "s-00000001", "accepted": True}
        assert r2.json()["session_id"] == "s-00000002"

    def test_full_lifecycle(self, svc):
        store, _, client = svc
        sid = start(client).json()["session_id"]
        drain(client)
        r = submit_events(client, sid, [
            {"event_id": "e1", "kind": "page_view", "ts": BASE + 10_000},
            {"event_id": "e2", "kind": "add_to_cart", "ts": BASE + 20_000},
            {"event_id": "e3", "kind": "purchase", "ts": BASE + 30_000},
        ])
        assert r.json()["accepted_count"] == 3
        drain(client)
        view = end(client, sid, BASE + 272_000).json()
        drain(client)
        assert view["logout_time"] == BASE + 272_000
        doc = store.get("sessions", "t1", sid)
        assert doc["action_count"] == 3
        assert (doc["pages_viewed"], doc["products_added"], doc["purchases"]) == (1, 1, 1)
        assert doc["risk"] is not None
        assert len(doc["risk"]["verdicts"]) == 7

    def test_end_reports_duration(self, svc):
        _, _, client = svc
        sid = start(client).json()["session_id"]
        drain(client)
        view = end(client, sid, BASE + 272_000).json()
        drain(client)
        view = end(client, sid, BASE + 999_000).json()  # second end ignored
        assert view["logout_time"] == BASE + 272_000
        assert view["duration_seconds"] == 272.0

    def test_end_before_drain_returns_pending_view(self, svc):
        _, _, client = svc
        sid = start(client).json()["session_id"]
        view = end(client, sid, BASE + 1000).json()
        assert view.get("pending") is True
        assert view["logout_time"] == BASE + 1000

    def test_event_replay_not_double_counted(self, svc):
        store, _, client = svc
        sid = start(client).json()["session_id"]
        drain(client)
        batch = [{"event_id": "e1", "kind": "page_view", "ts": BASE + 1000}]
        assert submit_events(client, sid, batch).json()["accepted_count"] == 1
        assert submit_events(client, sid, batch).json()["accepted_count"] == 0
        drain(client)
        assert store.get("sessions", "t1", sid)["action_count"] == 1
        assert len(store.query_events("t1", sid)) == 1

    def test_logout_never_before_login(self, svc):
        store, _, client = svc
        sid = start(client, ts=BASE).json()["session_id"]
        drain(client)
        end(client, sid, BASE - HOUR_MS)
        drain(client)
        doc = store.get("sessions", "t1", sid)
        assert doc["logout_time"] == doc["login_time"]

    def test_event_ts_floored_at_login(self, svc):
        store, _, client = svc
        sid = start(client, ts=BASE).json()["session_id"]
        drain(client)
        submit_events(client, sid, [{"event_id": "e1", "kind": "page_view", "ts": 0}])
        drain(client)
        events = store.query_events("t1", sid)
        assert events[0]["timestamp"] == BASE


class TestTenantIsolation:
    @pytest.fixture
    def two_tenants(self, demo_geoip):
        return make_service(
            demo_geoip, tenants=(("t1", "key-1", 100000), ("t2", "key-2", 100000)),
            clock_ms=lambda: NOW_MS,
        )

    def test_foreign_session_invisible(self, two_tenants):
        _, _, client = two_tenants
        sid = start(client).json()["session_id"]
        drain(client)
        other = {"X-API-Key": "key-2"}
        r = submit_events(client, sid, [{"event_id": "e1", "kind": "page_view"}], key=other)
        assert r.status_code == 404
        assert end(client, sid, BASE, key=other).status_code == 404
        assert get_session(client, sid, key=other) is None

    def test_session_ids_independent_per_tenant(self, two_tenants):
        _, _, client = two_tenants
        assert start(client).json()["session_id"] == "s-00000001"
        assert start(client, key={"X-API-Key": "key-2"}).json()["session_id"] == "s-00000001"

    def test_config_is_per_tenant(self, two_tenants):
        _, _, client = two_tenants
        cfg = client.get("/v1/config/rules", headers=KEY).json()
        cfg.pop("version")
        cfg["velocity_kmh"] = 555.0
        client.put("/v1/config/rules", json=cfg, headers=KEY)
        assert client.get("/v1/config/rules", headers=KEY).json()["velocity_kmh"] == 555.0
        other = client.get("/v1/config/rules", headers={"X-API-Key": "key-2"}).json()
        assert other["velocity_kmh"] == 1000.0


class TestRuleConfigApi:
    def test_defaults_and_version_zero(self, svc):
        _, _, client = svc
        cfg = client.get("/v1/config/rules", headers=KEY).json()
        assert cfg["version"] == 0
        assert cfg["impossible_travel"] == 0.4
        assert cfg["high_min"] == 0.5

    def test_put_bumps_version(self, svc):
        _, _, client = svc
        cfg = client.get("/v1/config/rules", headers=KEY).json()
        cfg.pop("version")
        assert client.put("/v1/config/rules", json=cfg, headers=KEY).json()["version"] == 1
        assert client.put("/v1/config/rules", json=cfg, headers=KEY).json()["version"] == 2

    def test_invalid_bands_rejected_with_field(self, svc):
        _, _, client = svc
        r = client.put("/v1/config/rules", json={"medium_min": 0.6, "high_min": 0.5},
                       headers=KEY)
        assert r.status_code == 400 and r.json()["field"] == "high_min"

    def test_unknown_field_rejected(self, svc):
        _, _, client = svc
        r = client.put("/v1/config/rules", json={"velocity": 5}, headers=KEY)
        assert r.status_code == 400

    def test_velocity_override_changes_detection(self, svc):
        store, _, client = svc
        client.put("/v1/config/rules", json={"velocity_kmh": 1200.0}, headers=KEY)
        # Dhaka -> Amsterdam (~7638 km) in 7 h is ~1091 km/h: over the default
        # threshold but under the raised one
        start(client, user="traveller", ip=DHAKA_IP, ts=BASE)
        drain(client)
        sid = start(client, user="traveller", ip=AMSTERDAM_IP, ts=BASE + 7 * HOUR_MS).json()["session_id"]
        drain(client)
        verdicts = {v["rule_id"]: v for v in store.get("sessions", "t1", sid)["risk"]["verdicts"]}
        assert not verdicts["impossible_travel"]["fired"]

    def test_default_velocity_flags_same_trip(self, svc):
        store, _, client = svc
        start(client, user="traveller", ip=DHAKA_IP, ts=BASE)
        drain(client)
        sid = start(client, user="traveller", ip=AMSTERDAM_IP, ts=BASE + 7 * HOUR_MS).json()["session_id"]
        drain(client)
        verdicts = {v["rule_id"]: v for v in store.get("sessions", "t1", sid)["risk"]["verdicts"]}
        assert verdicts["impossible_travel"]["fired"]


def build_high_risk(client, store):
    """Ten habitual Dhaka sessions, then a burst from a fresh device in Tokyo."""
    for day in range(10):
        start(client, user="victim", ip=DHAKA_IP, ts=BASE + day * DAY_MS)
        drain(client)
    last_login = BASE + 9 * DAY_MS
    r = start(client, user="victim", fp={"ua": "curl/8"}, ip=TOKYO_IP,
              ts=last_login + HOUR_MS)
    drain(client)
    return r.json()["session_id"]


class TestSuspiciousFeed:
    def test_high_risk_session_lands_in_feed(self, svc):
        store, _, client = svc
        sid = build_high_risk(client, store)
        doc = store.get("sessions", "t1", sid)
        assert doc["risk"]["level"] == "High"
        assert doc["suspicious"] is True
        records = client.get("/v1/suspicious", headers=KEY).json()["records"]
        assert [r["session_id"] for r in records] == [sid]
        fired = {v["rule_id"] for v in records[0]["assessment"]["verdicts"] if v["fired"]}
        assert {"new_device", "new_country", "impossible_travel"} <= fired

    def test_medium_sessions_also_recorded(self, svc):
        store, _, client = svc
        # same device, plausible travel speed, off-hour + country change = Medium
        for day in range(10):
            start(client, user="u1", ip=DHAKA_IP, ts=BASE + day * DAY_MS)
            drain(client)
        sid = start(client, user="u1", ip=AMSTERDAM_IP,
                    ts=BASE + 9 * DAY_MS + 25 * HOUR_MS).json()["session_id"]
        drain(client)
        doc = store.get("sessions", "t1", sid)
        assert doc["risk"]["level"] == "Medium"
        assert doc["suspicious"] is False  # only High marks the session itself
        records = client.get("/v1/suspicious", params={"level": "Medium"}, headers=KEY).json()["records"]
        assert [r["session_id"] for r in records] == [sid]

    def test_triage_confirm_and_history(self, svc):
        store, _, client = svc
        sid = build_high_risk(client, store)
        rid = f"sa-{sid}"
        r = client.post(f"/v1/suspicious/{rid}/triage",
                        json={"disposition": "confirm", "note": "verified"}, headers=KEY)
        assert r.status_code == 200
        doc = r.json()
        assert doc["disposition"] == "confirm" and doc["note"] == "verified"
        client.post(f"/v1/suspicious/{rid}/triage",
                    json={"disposition": "false_positive"}, headers=KEY)
        doc = store.get("suspicious", "t1", rid)
        assert doc["disposition"] == "false_positive"
        assert [h["disposition"] for h in doc["disposition_history"]] == [
            "confirm", "false_positive"]

    def test_triage_bad_disposition(self, svc):
        store, _, client = svc
        sid = build_high_risk(client, store)
        r = client.post(f"/v1/suspicious/sa-{sid}/triage",
                        json={"disposition": "ignore"}, headers=KEY)
        assert r.status_code == 400

    def test_triage_unknown_record_404(self, svc):
        _, _, client = svc
        r = client.post("/v1/suspicious/sa-nope/triage",
                        json={"disposition": "confirm"}, headers=KEY)
        assert r.status_code == 404


class TestRapidRescoring:
    def test_burst_rescored_on_end(self, svc):
        store, _, client = svc
        sid = start(client).json()["session_id"]
        drain(client)
        events = [{"event_id": f"e{i}", "kind": "page_view", "ts": BASE + i * 500}
                  for i in range(60)]
        submit_events(client, sid, events)
        drain(client)
        doc = store.get("sessions", "t1", sid)
        verdicts = {v["rule_id"]: v for v in doc["risk"]["verdicts"]}
        assert verdicts["rapid_actions"]["fired"]
        assert doc["risk"]["score"] == pytest.approx(0.2)

    def test_slow_events_stay_quiet(self, svc):
        store, _, client = svc
        sid = start(client).json()["session_id"]
        drain(client)
        events = [{"event_id": f"e{i}", "kind": "page_view", "ts": BASE + i * 2000}
                  for i in range(60)]
        submit_events(client, sid, events)
        drain(client)
        verdicts = {v["rule_id"]: v for v in store.get("sessions", "t1", sid)["risk"]["verdicts"]}
        assert not verdicts["rapid_actions"]["fired"]

    def test_login_verdicts_frozen_across_rescore(self, svc):
        store, _, client = svc
        sid = build_high_risk(client, store)
        before = store.get("sessions", "t1", sid)["risk"]["verdicts"]
        submit_events(client, sid, [{"event_id": "x1", "kind": "page_view",
                                     "ts": BASE + 9 * DAY_MS + HOUR_MS}])
        drain(client)
        after = store.get("sessions", "t1", sid)["risk"]["verdicts"]
        for b, a in zip(before, after):
            if b["rule_id"] != "rapid_actions":
                assert b == a


class TestAnalyticsEndpoints:
    def seed(self, client):
        for day in range(3):
            for u in range(2):
                sid = start(client, user=f"u{u}", ts=BASE + day * DAY_MS).json()["session_id"]
                end(client, sid, BASE + day * DAY_MS + 272_000)
        drain(client)

    def test_summary(self, svc):
        _, _, client = svc
        self.seed(client)
        r = client.get("/v1/analytics/summary",
                       params={"time_from": BASE, "time_to": BASE + 3 * DAY_MS}, headers=KEY)
        body = r.json()
        assert body["total_sessions"] == 6
        assert body["dau_avg"] == pytest.approx(2.0)
        assert body["mau"] == 2
        assert body["avg_session_duration_s"] == pytest.approx(272.0)

    def test_daily_series(self, svc):
        _, _, client = svc
        self.seed(client)
        r = client.get("/v1/analytics/daily",
                       params={"time_from": BASE, "time_to": BASE + 3 * DAY_MS}, headers=KEY)
        series = r.json()["series"]
        assert [p["sessions"] for p in series] == [2, 2, 2]

    def test_distribution(self, svc):
        _, _, client = svc
        self.seed(client)
        r = client.get("/v1/analytics/distribution",
                       params={"dimension": "country", "time_from": BASE,
                               "time_to": BASE + 3 * DAY_MS}, headers=KEY)
        assert r.json()["entries"][0]["key"] == "BD"

    def test_bad_dimension_400(self, svc):
        _, _, client = svc
        r = client.get("/v1/analytics/distribution", params={"dimension": "browser"},
                       headers=KEY)
        assert r.status_code == 400

    def test_inverted_range_400(self, svc):
        _, _, client = svc
        r = client.get("/v1/analytics/summary",
                       params={"time_from": 10, "time_to": 5}, headers=KEY)
        assert r.status_code == 400


def run_fixed_traffic(client, store):
    for day in range(5):
        for u in range(3):
            sid = start(client, user=f"u{u}", ip=DHAKA_IP,
                        ts=BASE + day * DAY_MS + u * HOUR_MS).json()["session_id"]
            submit_events(client, sid, [
                {"event_id": f"{sid}-e{i}", "kind": "page_view",
                 "ts": BASE + day * DAY_MS + u * HOUR_MS + i * 10_000}
                for i in range(4)
            ])
            end(client, sid, BASE + day * DAY_MS + u * HOUR_MS + 272_000)
    start(client, user="u0", fp={"ua": "curl/8"}, ip=TOKYO_IP,
          ts=BASE + 4 * DAY_MS + 30 * 60_000)
    drain(client)


class TestDeterminismAndReplay:
    def test_identical_runs_identical_state(self, demo_geoip):
        hashes = []
        for _ in range(2):
            store, _, client = make_service(demo_geoip, clock_ms=lambda: NOW_MS)
            run_fixed_traffic(client, store)
            hashes.append(store.state_hash())
        assert hashes[0] == hashes[1]

    def test_replaying_job_log_changes_nothing(self, demo_geoip):
        store, app, client = make_service(demo_geoip, clock_ms=lambda: NOW_MS)
        run_fixed_traffic(client, store)
        before = store.state_hash()
        for _ in range(2):
            for job in list(app.state.queue.log):
                app.state.worker.process(job)
        assert store.state_hash() == before
