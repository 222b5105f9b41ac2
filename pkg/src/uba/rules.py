"""The seven-rule detection engine and weighted risk scoring.

Rules: new_device, new_country, impossible_travel, vpn_proxy, rapid_actions,
multi_account_ip, unusual_hour. Each fired rule contributes its configured
weight; the total (clamped to 1.0) maps to Low / Medium / High bands.
"""

from __future__ import annotations

import ipaddress
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional, Sequence

from .geo import TravelCheck, is_impossible_travel
from .history import HistorySnapshot, login_hour_utc
from .types import (
    ActivityEvent,
    RiskAssessment,
    RiskLevel,
    RuleVerdict,
    Session,
    UNKNOWN_COUNTRY,
    ValidationError,
)

RULE_IDS = (
    "new_device",
    "new_country",
    "impossible_travel",
    "vpn_proxy",
    "rapid_actions",
    "multi_account_ip",
    "unusual_hour",
)


@dataclass(frozen=True)
class RuleConfig:
    # rule weights (risk points per fired rule)
    new_device: float = 0.3
    new_country: float = 0.2
    impossible_travel: float = 0.4
    vpn_proxy: float = 0.1
    rapid_actions: float = 0.2
    multi_account_ip: float = 0.3
    unusual_hour: float = 0.1
    # thresholds
    velocity_kmh: float = 1000.0
    noise_floor_km: float = 100.0
    country_presence_ratio: float = 0.8
    history_window: int = 10
    rapid_action_count: int = 50
    rapid_action_window_s: int = 60
    multi_account_users: int = 3
    multi_account_window_s: int = 600
    unusual_hour_min_history: int = 10
    typical_hour_coverage: float = 0.9
    # risk bands
    medium_min: float = 0.3
    high_min: float = 0.5
    # allow-lists
    vpn_asn_allowlist: frozenset[int] = frozenset()
    ip_allowlist: frozenset[str] = frozenset()  # CIDR strings

    def __post_init__(self):
        for rule in RULE_IDS:
            w = getattr(self, rule)
            if not 0.0 <= w <= 1.0:
                raise ValidationError(f"weight {rule} must be in [0, 1]", field=rule)
        for name in (
            "velocity_kmh",
            "noise_floor_km",
            "history_window",
            "rapid_action_count",
            "rapid_action_window_s",
            "multi_account_users",
            "multi_account_window_s",
            "unusual_hour_min_history",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive", field=name)
        for name in ("country_presence_ratio", "typical_hour_coverage"):
            r = getattr(self, name)
            if not 0.0 < r <= 1.0:
                raise ValidationError(f"{name} must be in (0, 1]", field=name)
        if not 0.0 <= self.medium_min < self.high_min <= 1.0:
            raise ValidationError(
                "risk bands require 0 <= medium_min < high_min <= 1", field="high_min"
            )
        for cidr in self.ip_allowlist:
            try:
                ipaddress.ip_network(cidr, strict=False)
            except ValueError as exc:
                raise ValidationError(f"bad CIDR in ip_allowlist: {cidr}", field="ip_allowlist") from exc

    def weight(self, rule_id: str) -> float:
        return float(getattr(self, rule_id))

    def to_json(self) -> dict:
        doc = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "vpn_asn_allowlist":
                value = sorted(value)
            elif f.name == "ip_allowlist":
                value = sorted(value)
            doc[f.name] = value
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RuleConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown field {sorted(unknown)[0]}", field=sorted(unknown)[0])
        kwargs = dict(doc)
        if "vpn_asn_allowlist" in kwargs:
            kwargs["vpn_asn_allowlist"] = frozenset(int(a) for a in kwargs["vpn_asn_allowlist"])
        if "ip_allowlist" in kwargs:
            kwargs["ip_allowlist"] = frozenset(str(c) for c in kwargs["ip_allowlist"])
        return cls(**kwargs)


def _verdict(rule_id: str, fired: bool, config: RuleConfig, evidence: dict) -> RuleVerdict:
    return RuleVerdict(
        rule_id=rule_id,
        fired=fired,
        weight_applied=config.weight(rule_id) if fired else 0.0,
        evidence=tuple(sorted((k, str(v)) for k, v in evidence.items())),
    )


def typical_hours(snapshot: HistorySnapshot, coverage: float) -> set[int]:
    """Smallest set of historically frequent login hours whose cumulative
    frequency reaches `coverage`; ties go to the lower hour."""
    total = sum(snapshot.login_hours.values())
    if total == 0:
        return set()
    ranked = sorted(snapshot.login_hours.items(), key=lambda kv: (-kv[1], kv[0]))
    hours: set[int] = set()
    cum = 0
    for hour, count in ranked:
        hours.add(hour)
        cum += count
        if cum / total >= coverage:
            break
    return hours


def _ip_allowlisted(ip: str, allowlist: Iterable[str]) -> bool:
    try:
        addr = ipaddress.ip_address(ip)
    except ValueError:
        return False
    for cidr in allowlist:
        net = ipaddress.ip_network(cidr, strict=False)
        if addr.version == net.version and addr in net:
            return True
    return False


def evaluate_login_rules(
    session: Session,
    snapshot: HistorySnapshot,
    ip_users: set[str],
    config: RuleConfig,
) -> list[RuleVerdict]:
    """Evaluate the six login-time rules (everything except rapid_actions)."""
    verdicts: list[RuleVerdict] = []
    n = snapshot.sessions_considered

    fired = n >= 1 and session.fingerprint.hash not in snapshot.fingerprints
    verdicts.append(
        _verdict("new_device", fired, config,
                 {"history_sessions": n, "fingerprint": session.fingerprint.hash[:12]})
    )

    country = session.geo.country
    if n >= 1 and country != UNKNOWN_COUNTRY:
        presence = snapshot.countries.get(country, 0) / n
        fired = presence < config.country_presence_ratio
        ev = {"country": country, "presence_ratio": f"{presence:.4f}", "history_sessions": n}
    else:
        fired = False
        ev = {"country": country, "disabled": "no baseline" if n < 1 else "unknown country"}
    verdicts.append(_verdict("new_country", fired, config, ev))

    ref_time = snapshot.travel_reference_time
    if snapshot.last_geo is not None and ref_time is not None:
        tc = TravelCheck(
            prev=snapshot.last_geo,
            curr=session.geo.point,
            prev_logout_time=ref_time,
            curr_login_time=session.login_time,
        )
        fired, evidence = is_impossible_travel(
            tc, threshold_kmh=config.velocity_kmh, noise_floor_km=config.noise_floor_km
        )
        ev = {
            "distance_km": f"{evidence.distance_km:.3f}",
            "hours": f"{evidence.hours:.6f}",
            "velocity_kmh": f"{evidence.velocity_kmh:.3f}",
        }
    else:
        fired = False
        ev = {"disabled": "no previous geo"}
    verdicts.append(_verdict("impossible_travel", fired, config, ev))

    fired = (
        session.geo.is_vpn
        and session.geo.asn not in config.vpn_asn_allowlist
        and not _ip_allowlisted(session.ip, config.ip_allowlist)
    )
    verdicts.append(
        _verdict("vpn_proxy", fired, config,
                 {"is_vpn": session.geo.is_vpn, "asn": session.geo.asn})
    )

    distinct = set(ip_users) | {session.user_id}
    fired = len(distinct) > config.multi_account_users
    verdicts.append(
        _verdict("multi_account_ip", fired, config,
                 {"ip": session.ip, "distinct_users": len(distinct)})
    )

    hour = login_hour_utc(session.login_time)
    if n >= config.unusual_hour_min_history:
        usual = typical_hours(snapshot, config.typical_hour_coverage)
        fired = hour not in usual
        ev = {"login_hour": hour, "typical_hours": ",".join(str(h) for h in sorted(usual))}
    else:
        fired = False
        ev = {"login_hour": hour, "disabled": f"history {n} < {config.unusual_hour_min_history}"}
    verdicts.append(_verdict("unusual_hour", fired, config, ev))

    return verdicts


def evaluate_rapid_actions(
    events: Sequence[ActivityEvent], config: RuleConfig
) -> RuleVerdict:
    """Sliding-window burst detector: fires when more than `rapid_action_count`
    events land inside any window strictly shorter than the configured span."""
    timestamps = [e.timestamp for e in events]
    if any(b < a for a, b in zip(timestamps, timestamps[1:])):
        raise ValueError("events must be time-ordered")
    window_ms = config.rapid_action_window_s * 1000
    max_count = 0
    max_span_ms = 0
    lo = 0
    for hi in range(len(timestamps)):
        while timestamps[hi] - timestamps[lo] >= window_ms:
            lo += 1
        count = hi - lo + 1
        if count > max_count:
            max_count = count
            max_span_ms = timestamps[hi] - timestamps[lo]
    fired = max_count > config.rapid_action_count
    return _verdict(
        "rapid_actions",
        fired,
        config,
        {"max_burst": max_count, "burst_span_ms": max_span_ms, "events": len(timestamps)},
    )


def classify_risk(score: float, config: RuleConfig) -> RiskLevel:
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    if score >= config.high_min:
        return RiskLevel.HIGH
    if score >= config.medium_min:
        return RiskLevel.MEDIUM
    return RiskLevel.LOW


def assess(
    session: Session,
    snapshot: HistorySnapshot,
    ip_users: set[str],
    events: Sequence[ActivityEvent],
    config: RuleConfig,
    assessed_at: int,
) -> RiskAssessment:
    """Full seven-rule assessment; pure in everything but `assessed_at`."""
    verdicts = evaluate_login_rules(session, snapshot, ip_users, config)
    rapid = evaluate_rapid_actions(events, config)
    # canonical rule ordering: rapid_actions sits between vpn and multi-account
    ordered = verdicts[:4] + [rapid] + verdicts[4:]
    score = min(1.0, math.fsum(v.weight_applied for v in ordered))
    return RiskAssessment(
        session_id=session.session_id,
        verdicts=tuple(ordered),
        score=score,
        level=classify_risk(score, config),
        assessed_at=assessed_at,
    )
