"""Product metrics over stored sessions: DAU/MAU, bounce rate, durations,
suspicious share, country/device distributions, daily series.

Day boundaries are UTC. Open sessions count toward totals and DAU but are
excluded from duration/actions averages and the bounce denominator.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Optional

from .storage import SessionFilter, Store, StorageError

DAY_MS = 86_400_000
MAU_WINDOW_DAYS = 30

DIMENSIONS = ("country", "device_type")


@dataclass(frozen=True)
class MetricsSummary:
    total_sessions: int
    dau_avg: float
    mau: int
    avg_session_duration_s: Optional[float]
    avg_actions_per_session: Optional[float]
    bounce_rate: float
    suspicious_sessions: int
    suspicious_fraction: float
    top_countries: list[tuple[str, float]]
    top_device_types: list[tuple[str, float]]

    def to_json(self) -> dict[str, Any]:
        return {
            "total_sessions": self.total_sessions,
            "dau_avg": self.dau_avg,
            "mau": self.mau,
            "avg_session_duration_s": self.avg_session_duration_s,
            "avg_actions_per_session": self.avg_actions_per_session,
            "bounce_rate": self.bounce_rate,
            "suspicious_sessions": self.suspicious_sessions,
            "suspicious_fraction": self.suspicious_fraction,
            "top_countries": [{"key": k, "fraction": f} for k, f in self.top_countries],
            "top_device_types": [{"key": k, "fraction": f} for k, f in self.top_device_types],
        }


def _sessions_in_range(store: Store, tenant_id: str, time_from: int, time_to: int) -> list[dict]:
    if time_from >= time_to:
        raise StorageError("inverted time range")
    flt = SessionFilter(time_from=time_from, time_to=time_to)
    out: list[dict] = []
    page = 0
    while True:
        batch = store.query_sessions(tenant_id, flt, page=page, page_size=1000)
        out.extend(batch)
        if len(batch) < 1000:
            return out
        page += 1


def compute_summary(store: Store, tenant_id: str, time_from: int, time_to: int) -> MetricsSummary:
    docs = _sessions_in_range(store, tenant_id, time_from, time_to)
    total = len(docs)

    users_by_day: dict[int, set[str]] = {}
    for d in docs:
        users_by_day.setdefault(d["login_time"] // DAY_MS, set()).add(d["user_id"])
    first_day = time_from // DAY_MS
    last_day = (time_to - 1) // DAY_MS
    n_days = last_day - first_day + 1
    dau_avg = (
        sum(len(users_by_day.get(day, ())) for day in range(first_day, last_day + 1)) / n_days
        if n_days > 0
        else 0.0
    )

    mau_from = time_to - MAU_WINDOW_DAYS * DAY_MS
    mau = len({d["user_id"] for d in docs if d["login_time"] >= mau_from})

    ended = [d for d in docs if d["logout_time"] is not None]
    if ended:
        avg_duration = sum((d["logout_time"] - d["login_time"]) / 1000.0 for d in ended) / len(ended)
        avg_actions = sum(d["action_count"] for d in ended) / len(ended)
        bounce_rate = sum(1 for d in ended if d["action_count"] <= 1) / len(ended)
    else:
        avg_duration = None
        avg_actions = None
        bounce_rate = 0.0

    suspicious = sum(1 for d in docs if d["suspicious"])

    def top(counter: Counter) -> list[tuple[str, float]]:
        if total == 0:
            return []
        return [(k, c / total) for k, c in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))]

    countries = Counter(d["country"] for d in docs)
    devices = Counter(d["device_type"] for d in docs)

    return MetricsSummary(
        total_sessions=total,
        dau_avg=dau_avg,
        mau=mau,
        avg_session_duration_s=avg_duration,
        avg_actions_per_session=avg_actions,
        bounce_rate=bounce_rate,
        suspicious_sessions=suspicious,
        suspicious_fraction=suspicious / total if total else 0.0,
        top_countries=top(countries),
        top_device_types=top(devices),
    )


def timeseries_daily_sessions(
    store: Store, tenant_id: str, time_from: int, time_to: int
) -> list[tuple[str, int]]:
    """One (ISO date, count) entry per UTC day in range, zero-filled."""
    import datetime

    docs = _sessions_in_range(store, tenant_id, time_from, time_to)
    per_day = Counter(d["login_time"] // DAY_MS for d in docs)
    first_day = time_from // DAY_MS
    last_day = (time_to - 1) // DAY_MS
    out = []
    for day in range(first_day, last_day + 1):
        date = datetime.datetime.fromtimestamp(day * 86400, tz=datetime.timezone.utc).date()
        out.append((date.isoformat(), per_day.get(day, 0)))
    return out


def distribution_by(
    store: Store, tenant_id: str, dimension: str, time_from: int, time_to: int
) -> list[tuple[str, int, float]]:
    """Descending (key, count, fraction) list over a supported dimension."""
    if dimension not in DIMENSIONS:
        raise StorageError(f"unknown dimension {dimension!r}; expected one of {DIMENSIONS}")
    docs = _sessions_in_range(store, tenant_id, time_from, time_to)
    total = len(docs)
    counts = Counter(d[dimension] for d in docs)
    return [
        (k, c, c / total)
        for k, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
