"""Shared domain types: sessions, events, fingerprints, geo, risk outcomes.

Everything here is a plain value object. Timestamps are UTC epoch milliseconds
throughout the codebase.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

MAX_ID_LEN = 128

# Client clocks may run ahead; anything beyond this is clamped to server time.
CLOCK_SKEW_ALLOWANCE_MS = 5 * 60 * 1000


class ValidationError(ValueError):
    """Input failed a domain invariant. `field` names the offending field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def validate_id(value: str, label: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{label} must be a non-empty string", field=label)
    if len(value) > MAX_ID_LEN:
        raise ValidationError(f"{label} exceeds {MAX_ID_LEN} chars", field=label)
    return value


def clamp_client_ts(client_ts: Optional[int], server_now_ms: int) -> int:
    """Accept a client-supplied timestamp but never let it run ahead of the
    server clock by more than the skew allowance."""
    if client_ts is None:
        return server_now_ms
    return min(int(client_ts), server_now_ms + CLOCK_SKEW_ALLOWANCE_MS)


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(
                f"latitude {self.latitude} outside [-90, 90]", field="latitude"
            )
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(
                f"longitude {self.longitude} outside [-180, 180]", field="longitude"
            )


UNKNOWN_COUNTRY = "ZZ"


@dataclass(frozen=True)
class GeoInfo:
    point: GeoPoint
    country: str
    is_vpn: bool = False
    asn: int = 0  # 0 = unknown

    def __post_init__(self):
        c = self.country
        if not (len(c) == 2 and c.isalpha() and c.isupper()):
            raise ValidationError(f"country {c!r} is not ISO-3166 alpha-2", field="country")


UNKNOWN_GEO = GeoInfo(point=GeoPoint(0.0, 0.0), country=UNKNOWN_COUNTRY)


@dataclass(frozen=True)
class DeviceFingerprint:
    attributes: tuple[tuple[str, str], ...]
    hash: str

    def attribute_map(self) -> dict[str, str]:
        return dict(self.attributes)


def canonical_fingerprint(attributes: Mapping[str, str]) -> DeviceFingerprint:
    """Hash a device attribute map into a stable identifier.

    The digest is SHA-256 over "key=value" lines sorted by key and joined with
    newlines; keys are lowercased, values kept as-is. Insertion order of the
    map never affects the result.
    """
    if not attributes:
        raise ValidationError("fingerprint attributes must be non-empty", field="fingerprint")
    normalized = sorted((k.lower(), str(v)) for k, v in attributes.items())
    canonical = "\n".join(f"{k}={v}" for k, v in normalized)
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    return DeviceFingerprint(attributes=tuple(normalized), hash=digest)


class EventKind(str, Enum):
    PAGE_VIEW = "page_view"
    ADD_TO_CART = "add_to_cart"
    PURCHASE = "purchase"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ActivityEvent:
    event_id: str
    tenant_id: str
    session_id: str
    kind: str  # page_view / add_to_cart / purchase / custom name, lowercase snake_case
    timestamp: int
    metadata: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        validate_id(self.event_id, "event_id")
        k = self.kind
        if not k or k != k.lower() or not all(ch.isalnum() or ch == "_" for ch in k):
            raise ValidationError(f"event kind {k!r} must be lowercase snake_case", field="kind")


class RiskLevel(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    @property
    def rank(self) -> int:
        return {"Low": 0, "Medium": 1, "High": 2}[self.value]


@dataclass(frozen=True)
class RuleVerdict:
    rule_id: str
    fired: bool
    weight_applied: float
    evidence: tuple[tuple[str, str], ...] = ()

    def evidence_map(self) -> dict[str, str]:
        return dict(self.evidence)


@dataclass(frozen=True)
class RiskAssessment:
    session_id: str
    verdicts: tuple[RuleVerdict, ...]
    score: float
    level: RiskLevel
    assessed_at: int


@dataclass
class Session:
    session_id: str
    tenant_id: str
    user_id: str
    fingerprint: DeviceFingerprint
    ip: str
    geo: GeoInfo
    login_time: int
    logout_time: Optional[int] = None
    pages_viewed: int = 0
    products_added: int = 0
    purchases: int = 0
    action_count: int = 0
    risk: Optional[RiskAssessment] = None
    suspicious: bool = False

    def __post_init__(self):
        validate_id(self.session_id, "session_id")
        validate_id(self.tenant_id, "tenant_id")
        validate_id(self.user_id, "user_id")
        if self.logout_time is not None and self.logout_time < self.login_time:
            raise ValidationError("logout_time precedes login_time", field="logout_time")

    @property
    def ended(self) -> bool:
        return self.logout_time is not None

    def apply_event(self, event: ActivityEvent) -> None:
        self.action_count += 1
        if event.kind == EventKind.PAGE_VIEW.value:
            self.pages_viewed += 1
        elif event.kind == EventKind.ADD_TO_CART.value:
            self.products_added += 1
        elif event.kind == EventKind.PURCHASE.value:
            self.purchases += 1

    def set_assessment(self, assessment: RiskAssessment) -> None:
        self.risk = assessment
        self.suspicious = assessment.level is RiskLevel.HIGH


def session_duration_seconds(s: Session) -> Optional[float]:
    """Seconds between login and logout, or None while the session is open."""
    if s.logout_time is None:
        return None
    return (s.logout_time - s.login_time) / 1000.0


def is_bounce(s: Session) -> bool:
    """A bounce is an ended session with at most one recorded action."""
    return s.action_count <= 1
