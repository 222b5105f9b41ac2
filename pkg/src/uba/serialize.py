"""Session / event / assessment <-> storage document conversion."""

from __future__ import annotations

from typing import Any, Optional

from .types import (
    ActivityEvent,
    DeviceFingerprint,
    GeoInfo,
    GeoPoint,
    RiskAssessment,
    RiskLevel,
    RuleVerdict,
    Session,
)

DESKTOP = "Desktop"
MOBILE = "Mobile"
TABLET = "Tablet"

# Substring rules over the user-agent attribute, checked in order.
_TABLET_MARKERS = ("ipad", "tablet", "kindle", "silk")
_MOBILE_MARKERS = ("mobile", "iphone", "android", "ipod", "windows phone")


def classify_device_type(fingerprint: DeviceFingerprint) -> str:
    ua = fingerprint.attribute_map().get("ua", "") or fingerprint.attribute_map().get(
        "user_agent", ""
    )
    ua = ua.lower()
    if any(m in ua for m in _TABLET_MARKERS):
        return TABLET
    if any(m in ua for m in _MOBILE_MARKERS):
        return MOBILE
    return DESKTOP


def assessment_to_doc(a: RiskAssessment) -> dict[str, Any]:
    return {
        "session_id": a.session_id,
        "score": a.score,
        "level": a.level.value,
        "assessed_at": a.assessed_at,
        "verdicts": [
            {
                "rule_id": v.rule_id,
                "fired": v.fired,
                "weight_applied": v.weight_applied,
                "evidence": dict(v.evidence),
            }
            for v in a.verdicts
        ],
    }


def doc_to_assessment(doc: dict[str, Any]) -> RiskAssessment:
    return RiskAssessment(
        session_id=doc["session_id"],
        verdicts=tuple(
            RuleVerdict(
                rule_id=v["rule_id"],
                fired=v["fired"],
                weight_applied=v["weight_applied"],
                evidence=tuple(sorted(v["evidence"].items())),
            )
            for v in doc["verdicts"]
        ),
        score=doc["score"],
        level=RiskLevel(doc["level"]),
        assessed_at=doc["assessed_at"],
    )


def session_to_doc(s: Session) -> dict[str, Any]:
    return {
        "id": s.session_id,
        "session_id": s.session_id,
        "tenant_id": s.tenant_id,
        "user_id": s.user_id,
        "ip": s.ip,
        "login_time": s.login_time,
        "logout_time": s.logout_time,
        "pages_viewed": s.pages_viewed,
        "products_added": s.products_added,
        "purchases": s.purchases,
        "action_count": s.action_count,
        "suspicious": s.suspicious,
        "country": s.geo.country,
        "lat": s.geo.point.latitude,
        "lon": s.geo.point.longitude,
        "is_vpn": s.geo.is_vpn,
        "asn": s.geo.asn,
        "fingerprint_hash": s.fingerprint.hash,
        "fingerprint_attrs": dict(s.fingerprint.attributes),
        "device_type": classify_device_type(s.fingerprint),
        "risk": assessment_to_doc(s.risk) if s.risk else None,
    }


def doc_to_session(doc: dict[str, Any]) -> Session:
    s = Session(
        session_id=doc["session_id"],
        tenant_id=doc["tenant_id"],
        user_id=doc["user_id"],
        fingerprint=DeviceFingerprint(
            attributes=tuple(sorted(doc["fingerprint_attrs"].items())),
            hash=doc["fingerprint_hash"],
        ),
        ip=doc["ip"],
        geo=GeoInfo(
            point=GeoPoint(doc["lat"], doc["lon"]),
            country=doc["country"],
            is_vpn=doc["is_vpn"],
            asn=doc["asn"],
        ),
        login_time=doc["login_time"],
        logout_time=doc["logout_time"],
        pages_viewed=doc["pages_viewed"],
        products_added=doc["products_added"],
        purchases=doc["purchases"],
        action_count=doc["action_count"],
    )
    if doc.get("risk"):
        s.risk = doc_to_assessment(doc["risk"])
    s.suspicious = bool(doc["suspicious"])
    return s


def event_to_doc(e: ActivityEvent) -> dict[str, Any]:
    return {
        "id": e.event_id,
        "event_id": e.event_id,
        "tenant_id": e.tenant_id,
        "session_id": e.session_id,
        "kind": e.kind,
        "timestamp": e.timestamp,
        "metadata": dict(e.metadata),
    }


def doc_to_event(doc: dict[str, Any]) -> ActivityEvent:
    return ActivityEvent(
        event_id=doc["event_id"],
        tenant_id=doc["tenant_id"],
        session_id=doc["session_id"],
        kind=doc["kind"],
        timestamp=doc["timestamp"],
        metadata=tuple(sorted(doc["metadata"].items())),
    )
