"""Synthetic traffic generator and detection-quality evaluator.

Generates a baseline population of well-behaved users, injects labeled anomaly
sessions per scenario through the public API, and scores the stored verdicts
against ground truth as a confusion matrix plus the usual binary metrics.

Single-rule anomalies never cross the High band on their own (the largest
single weight is 0.4 against a 0.5 band), so every scenario stacks its defining
rule with the correlated signals a real attacker session would carry (e.g. a
bot burst arrives on a fresh fingerprint). The defining rule is always among
the fired set and is re-verified before submission.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from .geo import TravelCheck, haversine_km, is_impossible_travel
from .types import GeoPoint

HOUR_MS = 3_600_000
DAY_MS = 24 * HOUR_MS

SESSION_DURATION_MS = 272_000  # 4m32s

SCENARIOS = (
    "new_device",
    "new_country",
    "impossible_travel",
    "vpn_proxy",
    "rapid_actions",
    "mixed",
)

SCENARIO_TITLES = {
    "new_device": "New Device Login",
    "new_country": "New Country Login",
    "impossible_travel": "Impossible Travel",
    "vpn_proxy": "VPN/Proxy Usage",
    "rapid_actions": "Bot-like Rapid Actions",
    "mixed": "Mixed Anomalies (High Risk)",
}

DEFAULT_SCENARIO_COUNTS = {
    "new_device": 50,
    "new_country": 40,
    "impossible_travel": 30,
    "vpn_proxy": 35,
    "rapid_actions": 20,
    "mixed": 25,
}


@dataclass(frozen=True)
class Location:
    name: str
    country: str
    point: GeoPoint
    ip_block: int  # second octet of the 10.x.0.0/16 block
    is_vpn: bool = False
    asn: int = 0


LOCATIONS = {
    "dhaka": Location("dhaka", "BD", GeoPoint(23.8103, 90.4125), 10, asn=17494),
    "nyc": Location("nyc", "US", GeoPoint(40.7128, -74.0060), 20, asn=7018),
    "amsterdam": Location("amsterdam", "NL", GeoPoint(52.3676, 4.9041), 30, asn=1136),
    "london": Location("london", "GB", GeoPoint(51.5074, -0.1278), 40, asn=2856),
    "tokyo": Location("tokyo", "JP", GeoPoint(35.6762, 139.6503), 50, asn=2516),
    "sydney": Location("sydney", "AU", GeoPoint(-33.8688, 151.2093), 60, asn=1221),
    "singapore_vpn": Location(
        "singapore_vpn", "SG", GeoPoint(1.3521, 103.8198), 70, is_vpn=True, asn=9009
    ),
    "kolkata": Location("kolkata", "IN", GeoPoint(22.5726, 88.3639), 80, asn=9498),
}

# Home-country mix skews toward BD/US/NL/GB/AU; JP/IN/SG stay anomaly-only
# destinations so cross-checks below always see a country change.
HOME_WEIGHTS = [("dhaka", 42), ("nyc", 18), ("amsterdam", 12), ("london", 16), ("sydney", 12)]


def geoip_csv_rows() -> list[str]:
    rows = ["cidr,country,lat,lon,is_vpn,asn"]
    for loc in LOCATIONS.values():
        rows.append(
            f"10.{loc.ip_block}.0.0/16,{loc.country},{loc.point.latitude},"
            f"{loc.point.longitude},{str(loc.is_vpn).lower()},{loc.asn}"
        )
    return rows


def write_geoip_csv(path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(geoip_csv_rows()) + "\n")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    injected_count: int
    seed: int = 42
    users: int = 200
    baseline_sessions: int = 12

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.injected_count < 0:
            raise ValueError("injected_count must be >= 0")


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def metrics_from_matrix(m: ConfusionMatrix) -> dict[str, Any]:
    notes = []
    if m.tp + m.fp == 0:
        precision = 1.0
        notes.append("no positives predicted; precision reported as 1.0 by convention")
    else:
        precision = m.tp / (m.tp + m.fp)
    if m.tp + m.fn == 0:
        recall = 1.0
        notes.append("no positive labels; recall reported as 1.0 by convention")
    else:
        recall = m.tp / (m.tp + m.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    fpr = 0.0 if m.fp + m.tn == 0 else m.fp / (m.fp + m.tn)
    accuracy = 0.0 if m.total == 0 else (m.tp + m.tn) / m.total
    out = {
        "accuracy": accuracy,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "false_positive_rate": fpr,
        "confusion": {"tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn},
    }
    if notes:
        out["notes"] = notes
    return out


def evaluate(
    labels: dict[str, str], observed_levels: dict[str, str], positive_level: str = "High"
) -> tuple[ConfusionMatrix, dict[str, Any]]:
    """Score observed risk levels against ground truth.

    `labels` maps session_id -> scenario name ("normal" or an anomaly
    scenario); every labeled session must have an observed level.
    """
    matrix = ConfusionMatrix()
    per_scenario: dict[str, dict[str, int]] = {}
    medium_count = 0
    for session_id, label in labels.items():
        if session_id not in observed_levels:
            raise ValueError(f"session {session_id} has no observed assessment")
        level = observed_levels[session_id]
        positive = level == positive_level
        anomalous = label != "normal"
        if level == "Medium":
            medium_count += 1
        row = per_scenario.setdefault(label, {"injected": 0, "detected": 0, "false_positives": 0})
        if anomalous:
            row["injected"] += 1
            if positive:
                matrix.tp += 1
                row["detected"] += 1
            else:
                matrix.fn += 1
        else:
            row["injected"] = 0
            if positive:
                matrix.fp += 1
                row["false_positives"] += 1
            else:
                matrix.tn += 1
    report = metrics_from_matrix(matrix)
    report["medium_sessions"] = medium_count
    report["per_scenario"] = {
        SCENARIO_TITLES.get(name, "Normal Behavior"): row
        for name, row in sorted(per_scenario.items())
    }
    return matrix, report


@dataclass
class UserProfile:
    user_id: str
    home: Location
    ip: str
    fingerprint: dict[str, str]
    base_hour: int
    last_login: int = 0
    last_logout: int = 0
    session_count: int = 0


class HarnessRun:
    """Scripted traffic generation against a service client.

    `client` is any httpx-compatible client (base_url set, X-API-Key supplied
    per request); fastapi's TestClient works for in-process runs.
    """

    def __init__(self, client, api_key: str, seed: int = 42, sim_end_ms: Optional[int] = None):
        self.client = client
        self.headers = {"X-API-Key": api_key}
        self.rng = random.Random(seed)
        self.seed = seed
        import time

        self.sim_end = sim_end_ms if sim_end_ms is not None else int(time.time() * 1000) - HOUR_MS
        self.labels: dict[str, str] = {}
        self.users: list[UserProfile] = []

    # -- plumbing -------------------------------------------------------

    def _post(self, path: str, body: dict) -> dict:
        resp = self.client.post(path, json=body, headers=self.headers)
        if resp.status_code >= 400:
            raise RuntimeError(f"POST {path} -> {resp.status_code}: {resp.text}")
        return resp.json()

    def _start_session(self, user: UserProfile, fingerprint, ip, login_time) -> str:
        out = self._post(
            "/v1/sessions",
            {
                "user_id": user.user_id,
                "fingerprint": fingerprint,
                "ip": ip,
                "client_ts": login_time,
            },
        )
        return out["session_id"]

    def _submit_events(self, session_id: str, events: list[dict]) -> None:
        self._post(f"/v1/sessions/{session_id}/events", {"events": events})

    def _end_session(self, session_id: str, logout_time: int) -> None:
        self._post(f"/v1/sessions/{session_id}/end", {"client_ts": logout_time})

    def drain(self) -> None:
        self._post("/v1/_drain", {})

    # -- generation -----------------------------------------------------

    def _make_fingerprint(self, tag: str) -> dict[str, str]:
        return {
            "ua": self.rng.choice(
                [
                    "Mozilla/5.0 (Windows NT 10.0; Win64; x64)",
                    "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_2)",
                    "Mozilla/5.0 (iPhone; CPU iPhone OS 17_0 like Mac OS X) Mobile",
                    "Mozilla/5.0 (Linux; Android 14; Pixel 8) Mobile",
                    "Mozilla/5.0 (iPad; CPU OS 17_0 like Mac OS X) Tablet",
                ]
            ),
            "screen": self.rng.choice(["1920x1080", "1440x900", "390x844", "2560x1440"]),
            "tz": self.rng.choice(["Asia/Dhaka", "America/New_York", "Europe/Amsterdam"]),
            "device_tag": tag,
        }

    def _user_ip(self, loc: Location, index: int) -> str:
        return f"10.{loc.ip_block}.{index // 250}.{index % 250 + 1}"

    def generate_baseline(self, users: int, sessions_per_user: int) -> None:
        """One session per user per day at the user's habitual hours."""
        if users < 1 or sessions_per_user < 1:
            raise ValueError("users and sessions_per_user must be >= 1")
        names = [name for name, _ in HOME_WEIGHTS]
        weights = [w for _, w in HOME_WEIGHTS]
        day0 = self.sim_end - (sessions_per_user + 3) * DAY_MS
        day0 -= day0 % DAY_MS
        for i in range(users):
            home = LOCATIONS[self.rng.choices(names, weights=weights)[0]]
            user = UserProfile(
                user_id=f"user-{i:05d}",
                home=home,
                ip=self._user_ip(home, i),
                fingerprint=self._make_fingerprint(f"device-{i:05d}"),
                base_hour=self.rng.randint(8, 14),
            )
            self.users.append(user)
        # interleave users day by day so the request stream looks realistic
        for day in range(sessions_per_user):
            for user in self.users:
                # even days at base_hour+1, odd at base_hour; the final
                # baseline session always lands on base_hour
                hour = user.base_hour + (1 if day % 2 == (sessions_per_user % 2) else 0)
                login = day0 + day * DAY_MS + hour * HOUR_MS
                self._run_normal_session(user, login)

    def _run_normal_session(self, user: UserProfile, login: int) -> None:
        sid = self._start_session(user, user.fingerprint, user.ip, login)
        self.labels[sid] = "normal"
        n_events = self.rng.randint(3, 8)
        events = [
            {
                "event_id": f"{sid}-e{k}",
                "kind": self.rng.choice(["page_view", "page_view", "add_to_cart", "purchase"]),
                "ts": login + 10_000 * (k + 1),
            }
            for k in range(n_events)
        ]
        self._submit_events(sid, events)
        logout = login + SESSION_DURATION_MS
        self._end_session(sid, logout)
        user.last_login = login
        user.last_logout = logout
        user.session_count += 1

    # -- anomaly scenarios ----------------------------------------------

    def inject_scenario(self, spec: ScenarioSpec, target_users: list[UserProfile]) -> None:
        """Inject `spec.injected_count` anomaly sessions, one per target user."""
        if spec.injected_count == 0:
            return
        if len(target_users) < spec.injected_count:
            raise ValueError(
                f"scenario {spec.name} needs {spec.injected_count} users, "
                f"got {len(target_users)}"
            )
        injector = getattr(self, f"_inject_{spec.name}")
        for k in range(spec.injected_count):
            injector(target_users[k], k)

    def _assert_impossible(self, user: UserProfile, dest: Location, login: int) -> None:
        # generator bug guard: re-check the engineered pair with our own call
        tc = TravelCheck(
            prev=user.home.point,
            curr=dest.point,
            prev_logout_time=user.last_logout,
            curr_login_time=login,
        )
        flagged, evidence = is_impossible_travel(tc)
        if not flagged:
            raise AssertionError(
                f"engineered travel not impossible: {evidence.velocity_kmh:.0f} km/h "
                f"over {evidence.distance_km:.0f} km"
            )

    def _run_anomaly_session(
        self,
        user: UserProfile,
        label: str,
        login: int,
        fingerprint: dict[str, str],
        ip: str,
        burst: bool = False,
    ) -> str:
        sid = self._start_session(user, fingerprint, ip, login)
        self.labels[sid] = label
        if burst:
            # 60 events in ~30 s: comfortably >50 inside a <60 s window
            events = [
                {"event_id": f"{sid}-b{k}", "kind": "page_view", "ts": login + 500 * k}
                for k in range(60)
            ]
        else:
            events = [
                {"event_id": f"{sid}-e{k}", "kind": "page_view", "ts": login + 10_000 * (k + 1)}
                for k in range(3)
            ]
        self._submit_events(sid, events)
        self._end_session(sid, login + SESSION_DURATION_MS)
        return sid

    def _inject_new_device(self, user: UserProfile, k: int) -> None:
        # stolen credentials replayed from a fresh machine abroad two days
        # later: new_device + new_country, velocity far below threshold
        dest = LOCATIONS["kolkata"]
        login = user.last_login + 48 * HOUR_MS
        fp = self._make_fingerprint(f"attacker-nd-{user.user_id}")
        self._run_anomaly_session(
            user, "new_device", login, fp, self._user_ip(dest, 1000 + k)
        )

    def _inject_new_country(self, user: UserProfile, k: int) -> None:
        # hijacked session reused from another continent an hour later:
        # new_country + impossible_travel
        dest = LOCATIONS["tokyo"]
        login = user.last_logout + HOUR_MS
        self._assert_impossible(user, dest, login)
        self._run_anomaly_session(
            user, "new_country", login, user.fingerprint, self._user_ip(dest, 2000 + k)
        )

    def _inject_impossible_travel(self, user: UserProfile, k: int) -> None:
        dest = LOCATIONS["tokyo"]
        login = user.last_logout + HOUR_MS // 2
        self._assert_impossible(user, dest, login)
        self._run_anomaly_session(
            user, "impossible_travel", login, user.fingerprint, self._user_ip(dest, 3000 + k)
        )

    def _inject_vpn_proxy(self, user: UserProfile, k: int) -> None:
        dest = LOCATIONS["singapore_vpn"]
        login = user.last_logout + HOUR_MS
        self._run_anomaly_session(
            user, "vpn_proxy", login, user.fingerprint, self._user_ip(dest, 4000 + k)
        )

    def _inject_rapid_actions(self, user: UserProfile, k: int) -> None:
        # bot burst from a headless browser: rapid_actions + new_device
        login = user.last_login + 24 * HOUR_MS
        fp = self._make_fingerprint(f"bot-{user.user_id}")
        self._run_anomaly_session(user, "rapid_actions", login, fp, user.ip, burst=True)

    def _inject_mixed(self, user: UserProfile, k: int) -> None:
        # everything at once: fresh device over a VPN abroad at 3am with a bot
        # burst -> new_device + new_country + vpn + unusual_hour + rapid
        dest = LOCATIONS["singapore_vpn"]
        login = user.last_logout + 13 * HOUR_MS
        fp = self._make_fingerprint(f"attacker-mx-{user.user_id}")
        self._run_anomaly_session(
            user, "mixed", login, fp, self._user_ip(dest, 5000 + k), burst=True
        )

    # -- full experiment ------------------------------------------------

    def run(
        self,
        scenario: str = "all",
        users: int = 200,
        baseline_sessions: int = 12,
        scenario_counts: Optional[dict[str, int]] = None,
    ) -> dict[str, Any]:
        counts = dict(scenario_counts or DEFAULT_SCENARIO_COUNTS)
        if scenario != "all":
            if scenario not in SCENARIOS:
                raise ValueError(f"unknown scenario {scenario!r}")
            counts = {scenario: counts.get(scenario, DEFAULT_SCENARIO_COUNTS[scenario])}
        total_anomalies = sum(counts.values())
        if total_anomalies > users:
            raise ValueError(
                f"{total_anomalies} anomalies need {total_anomalies} distinct users, got {users}"
            )
        self.generate_baseline(users, baseline_sessions)
        self.drain()
        cursor = 0
        for name in SCENARIOS:
            if name not in counts:
                continue
            spec = ScenarioSpec(
                name=name,
                injected_count=counts[name],
                seed=self.seed,
                users=users,
                baseline_sessions=baseline_sessions,
            )
            targets = self.users[cursor : cursor + spec.injected_count]
            cursor += spec.injected_count
            self.inject_scenario(spec, targets)
        self.drain()
        observed = self.collect_observed_levels()
        _, report = evaluate(self.labels, observed)
        report["seed"] = self.seed
        report["users"] = users
        report["baseline_sessions_per_user"] = baseline_sessions
        report["total_sessions"] = len(self.labels)
        return report

    def collect_observed_levels(self) -> dict[str, str]:
        observed: dict[str, str] = {}
        page = 0
        while True:
            resp = self.client.get(
                "/v1/sessions",
                params={"page": page, "page_size": 1000},
                headers=self.headers,
            )
            resp.raise_for_status()
            docs = resp.json()["sessions"]
            for doc in docs:
                risk = doc.get("risk")
                observed[doc["session_id"]] = risk["level"] if risk else "Low"
            if len(docs) < 1000:
                return observed
            page += 1


def write_report(report: dict[str, Any], path: str) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
