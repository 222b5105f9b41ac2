"""Per-user behavioral baselines and the per-IP recent-user index.

The baseline is a window over the user's most recent sessions; the rule engine
consumes it as an immutable snapshot taken strictly before the session under
evaluation (no lookahead).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .storage import Store
from .types import GeoPoint, Session

DEFAULT_HISTORY_WINDOW = 10

IP_INDEX_RETENTION_MS = 24 * 3600 * 1000


@dataclass(frozen=True)
class HistorySnapshot:
    user_id: str
    sessions_considered: int
    fingerprints: dict[str, int]  # fingerprint hash -> occurrences
    countries: dict[str, int]  # country code -> occurrences
    login_hours: dict[int, int]  # UTC hour-of-day -> occurrences
    last_geo: Optional[GeoPoint] = None
    last_logout_time: Optional[int] = None
    last_login_time: Optional[int] = None

    @property
    def travel_reference_time(self) -> Optional[int]:
        """Previous logout when known, else previous login (session never ended)."""
        if self.last_logout_time is not None:
            return self.last_logout_time
        return self.last_login_time


def empty_snapshot(user_id: str) -> HistorySnapshot:
    return HistorySnapshot(
        user_id=user_id, sessions_considered=0, fingerprints={}, countries={}, login_hours={}
    )


def login_hour_utc(login_time_ms: int) -> int:
    return (login_time_ms // 3_600_000) % 24


class UserHistory:
    """Baseline maintenance over the storage module's `users` and `ip_index`
    collections. All operations are idempotent by session_id / (ip, seen_at),
    so job replays leave the state untouched."""

    def __init__(self, store: Store, window: int = DEFAULT_HISTORY_WINDOW):
        if window < 1:
            raise ValueError("history window must be >= 1")
        self.store = store
        self.window = window

    @staticmethod
    def _user_key(user_id: str) -> str:
        return f"user:{user_id}"

    @staticmethod
    def _ip_key(ip: str) -> str:
        return f"ip:{ip}"

    def record_session(self, s: Session) -> None:
        """Upsert a session into its user's window and the IP index."""
        doc = self.store.get("users", s.tenant_id, self._user_key(s.user_id)) or {
            "tenant_id": s.tenant_id,
            "user_id": s.user_id,
            "sessions": [],
        }
        entry = {
            "session_id": s.session_id,
            "login_time": s.login_time,
            "logout_time": s.logout_time,
            "fingerprint_hash": s.fingerprint.hash,
            "country": s.geo.country,
            "login_hour": login_hour_utc(s.login_time),
            "lat": s.geo.point.latitude,
            "lon": s.geo.point.longitude,
        }
        sessions = [e for e in doc["sessions"] if e["session_id"] != s.session_id]
        sessions.append(entry)
        sessions.sort(key=lambda e: (-e["login_time"], e["session_id"]))
        doc["sessions"] = sessions[: self.window]
        self.store.put("users", s.tenant_id, self._user_key(s.user_id), doc)
        self._record_ip(s)

    def _record_ip(self, s: Session) -> None:
        key = self._ip_key(s.ip)
        doc = self.store.get("ip_index", s.tenant_id, key) or {
            "tenant_id": s.tenant_id,
            "ip": s.ip,
            "entries": [],
        }
        entries = {(u, t) for u, t in doc["entries"]}
        entries.add((s.user_id, s.login_time))
        # Expire against the newest entry ever seen (event time, not wall
        # clock) so replays cannot resurrect pruned entries.
        high_water = max(t for _, t in entries)
        cutoff = high_water - IP_INDEX_RETENTION_MS
        kept = sorted((u, t) for u, t in entries if t > cutoff)
        doc["entries"] = [list(e) for e in kept]
        self.store.put("ip_index", s.tenant_id, key, doc)

    def snapshot(self, tenant_id: str, user_id: str, as_of: int) -> HistorySnapshot:
        """Baseline over the newest `window` sessions strictly before `as_of`."""
        doc = self.store.get("users", tenant_id, self._user_key(user_id))
        if doc is None:
            return empty_snapshot(user_id)
        considered = [e for e in doc["sessions"] if e["login_time"] < as_of][: self.window]
        if not considered:
            return empty_snapshot(user_id)
        fingerprints: dict[str, int] = {}
        countries: dict[str, int] = {}
        hours: dict[int, int] = {}
        for e in considered:
            fingerprints[e["fingerprint_hash"]] = fingerprints.get(e["fingerprint_hash"], 0) + 1
            countries[e["country"]] = countries.get(e["country"], 0) + 1
            hours[e["login_hour"]] = hours.get(e["login_hour"], 0) + 1
        newest = considered[0]
        return HistorySnapshot(
            user_id=user_id,
            sessions_considered=len(considered),
            fingerprints=fingerprints,
            countries=countries,
            login_hours=hours,
            last_geo=GeoPoint(newest["lat"], newest["lon"]),
            last_logout_time=newest["logout_time"],
            last_login_time=newest["login_time"],
        )

    def distinct_users_from_ip(
        self, tenant_id: str, ip: str, window_seconds: int, as_of: int
    ) -> set[str]:
        """Distinct user ids seen from `ip` within (as_of - window, as_of]."""
        if window_seconds <= 0:
            raise ValueError("window_seconds must be positive")
        doc = self.store.get("ip_index", tenant_id, self._ip_key(ip))
        if doc is None:
            return set()
        lower = as_of - window_seconds * 1000
        return {u for u, t in doc["entries"] if lower < t <= as_of}
