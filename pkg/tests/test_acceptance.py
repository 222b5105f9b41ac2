"""Acceptance suite: one test per release criterion, each printing a single
PASS/FAIL line with the measured numbers."""

import math
import random
import time

import pytest

from conftest import make_service
from uba.geo import haversine_km
from uba.harness import ConfusionMatrix, HarnessRun, SCENARIOS, metrics_from_matrix
from uba.rules import RULE_IDS, RuleConfig, classify_risk
from uba.storage import MemoryStore, SessionFilter, SqliteStore
from uba.types import GeoPoint, RiskLevel

DAY_MS = 86_400_000
NOW_MS = 2_000_000_000_000

RESULTS = []


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


class TestAcceptance:
    def test_haversine_analytic_suite(self):
        cases = [
            ((0, 0), (0, 90), 10007.543),
            ((0, 0), (0, 180), 20015.087),
            ((0, 0), (1, 0), 111.195),
        ]
        worst = 0.0
        for a, b, expected in cases:
            d = haversine_km(GeoPoint(*a), GeoPoint(*b))
            worst = max(worst, abs(d - expected))
        # independent spherical-law-of-cosines check, frozen at full precision
        oracle = 7637.641955824423
        dhaka_ams = haversine_km(GeoPoint(23.8103, 90.4125), GeoPoint(52.3676, 4.9041))
        rel = abs(dhaka_ams - oracle) / oracle
        ok = worst < 1e-3 and rel < 0.005
        report(
            "haversine analytic suite",
            ok,
            f"max analytic error {worst:.2e} km (< 1e-3), "
            f"Dhaka-Amsterdam {dhaka_ams:.3f} km vs oracle {oracle:.3f} ({rel:.5%} < 0.5%)",
        )

    def test_rule_weights_and_band_boundaries(self):
        config = RuleConfig()
        expected = {
            "new_device": 0.3, "new_country": 0.2, "impossible_travel": 0.4,
            "vpn_proxy": 0.1, "rapid_actions": 0.2, "multi_account_ip": 0.3,
            "unusual_hour": 0.1,
        }
        weights_ok = all(config.weight(r) == w for r, w in expected.items())
        bands_ok = (
            classify_risk(0.2, config) is RiskLevel.LOW
            and classify_risk(0.3, config) is RiskLevel.MEDIUM
            and classify_risk(0.5, config) is RiskLevel.HIGH
        )
        report(
            "rule weights and risk bands",
            weights_ok and bands_ok,
            "default weights "
            + "/".join(f"{config.weight(r):g}" for r in RULE_IDS)
            + "; 0.2=Low 0.3=Medium 0.5=High",
        )

    def test_metrics_formula_oracle(self):
        m = ConfusionMatrix(tp=1955, fp=45, tn=1955, fn=45)
        out = metrics_from_matrix(m)
        tol = 0.0005  # 0.05 percentage points
        ok = (
            abs(out["precision"] - 0.9775) < tol
            and abs(out["recall"] - 0.9775) < tol
            and abs(out["false_positive_rate"] - 0.0225) < tol
        )
        report(
            "metrics formula oracle",
            ok,
            f"tp=1955 fp=45 fn=45 tn=1955 -> precision {out['precision']:.2%}, "
            f"recall {out['recall']:.2%}, FPR {out['false_positive_rate']:.2%}, "
            f"accuracy {out['accuracy']:.2%}, F1 {out['f1']:.2%} (all +/-0.05pp)",
        )

    def test_end_to_end_experiment(self, demo_geoip):
        t0 = time.monotonic()
        _, _, client = make_service(demo_geoip, clock_ms=lambda: NOW_MS)
        run = HarnessRun(client, "key-1", seed=42, sim_end_ms=NOW_MS - DAY_MS)
        result = run.run(users=200, baseline_sessions=12)
        elapsed = time.monotonic() - t0
        per = result["per_scenario"]
        it = per["Impossible Travel"]
        mixed = per["Mixed Anomalies (High Risk)"]
        ok = (
            result["total_sessions"] == 200 * 12 + 200
            and result["recall"] >= 0.97
            and result["false_positive_rate"] <= 0.03
            and it["detected"] == it["injected"] == 30
            and mixed["detected"] == mixed["injected"] == 25
            and elapsed < 120
        )
        report(
            "end-to-end experiment (seed 42, 200 users x 12 + 200 anomalies)",
            ok,
            f"recall {result['recall']:.2%} (>=97%), "
            f"FPR {result['false_positive_rate']:.2%} (<=3%), "
            f"impossible-travel {it['detected']}/{it['injected']} (=100%), "
            f"mixed High {mixed['detected']}/{mixed['injected']}, "
            f"{result['total_sessions']} sessions in {elapsed:.1f}s (<120s)",
        )

    def test_exactly_once_replay(self, demo_geoip):
        store, app, client = make_service(demo_geoip, clock_ms=lambda: NOW_MS)
        run = HarnessRun(client, "key-1", seed=7, sim_end_ms=NOW_MS - DAY_MS)
        run.run(users=20, baseline_sessions=12,
                scenario_counts={name: 2 for name in SCENARIOS})
        before = store.state_hash()
        jobs = list(app.state.queue.log)
        for _ in range(2):
            for job in jobs:
                app.state.worker.process(job)
        after = store.state_hash()
        report(
            "exactly-once replay",
            before == after,
            f"{len(jobs)} jobs replayed twice; state hash "
            f"{before[:12]}... unchanged" if before == after
            else f"state hash changed {before[:12]} -> {after[:12]}",
        )

    def test_tenant_isolation_randomized(self):
        tenants = ("t1", "t2", "t3")
        written = {t: {} for t in tenants}
        violations = 0
        for store in (MemoryStore(), SqliteStore()):
            rng = random.Random(20260823)
            for i in range(5000):
                t = rng.choice(tenants)
                op = rng.random()
                if op < 0.5:
                    sid = f"s-{rng.randint(0, 400)}"
                    doc = {"tenant_id": t, "session_id": sid, "user_id": f"u-{t}",
                           "login_time": rng.randint(0, 10**9), "owner": t}
                    store.put("sessions", t, sid, doc)
                    written[t][sid] = doc["login_time"]
                elif op < 0.8:
                    sid = f"s-{rng.randint(0, 400)}"
                    doc = store.get("sessions", t, sid)
                    if doc is not None and doc["owner"] != t:
                        violations += 1
                else:
                    for doc in store.query_sessions(t, SessionFilter(), page_size=1000):
                        if doc["owner"] != t:
                            violations += 1
        report(
            "tenant isolation (10,000 randomized ops, 3 tenants, both backends)",
            violations == 0,
            f"{violations} cross-tenant reads observed",
        )

    def test_rapid_action_detector_vs_oracle(self):
        from uba.rules import evaluate_rapid_actions
        from uba.types import ActivityEvent

        config = RuleConfig()
        rng = random.Random(555)
        window_ms = 60_000
        disagreements = 0
        for _ in range(1000):
            n = rng.randint(0, 150)
            timestamps = sorted(rng.randint(0, 240_000) for _ in range(n))
            best = 0
            for i in range(n):  # O(n^2) reference
                for j in range(i, n):
                    if timestamps[j] - timestamps[i] < window_ms:
                        best = max(best, j - i + 1)
            expected = best > 50
            events = [
                ActivityEvent(event_id=f"e{i}", tenant_id="t", session_id="s",
                              kind="page_view", timestamp=ts)
                for i, ts in enumerate(timestamps)
            ]
            if evaluate_rapid_actions(events, config).fired != expected:
                disagreements += 1
        report(
            "rapid-action detector vs brute-force oracle",
            disagreements == 0,
            f"1000 random streams, {disagreements} disagreements",
        )

    def test_throughput_smoke(self, demo_geoip):
        store, _, client = make_service(demo_geoip, clock_ms=lambda: NOW_MS)
        headers = {"X-API-Key": "key-1"}
        base = NOW_MS - 30 * DAY_MS
        sids = []
        for i in range(500):
            r = client.post("/v1/sessions", json={
                "user_id": f"u{i % 50}", "fingerprint": {"ua": f"agent-{i % 50}"},
                "ip": "10.10.0.1", "client_ts": base + i * 60_000,
            }, headers=headers)
            assert r.status_code == 202
            sids.append(r.json()["session_id"])
        accepted = 0
        for i, sid in enumerate(sids):
            events = [{"event_id": f"{sid}-e{k}", "kind": "page_view",
                       "ts": base + i * 60_000 + k * 2000} for k in range(20)]
            resp = client.post(f"/v1/sessions/{sid}/events",
                               json={"events": events}, headers=headers)
            accepted += resp.json()["accepted_count"]
        client.post("/v1/_drain", headers=headers)
        stored_events = sum(len(store.query_events("t1", sid)) for sid in sids)
        stored_sessions = len(store.get_all("sessions", "t1"))
        ok = accepted == 10_000 and stored_events == 10_000 and stored_sessions == 500
        report(
            "throughput smoke (10,000 events / 500 sessions)",
            ok,
            f"accepted {accepted}, stored {stored_events} events "
            f"across {stored_sessions} sessions, zero loss",
        )
