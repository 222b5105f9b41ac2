"""Great-circle distance, implied travel velocity, and the impossible-travel check."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .types import GeoPoint

EARTH_RADIUS_KM = 6371.0

# Below this gap we treat the jump as instantaneous rather than divide by ~0.
MIN_TRAVEL_GAP_MS = 1000

DEFAULT_VELOCITY_THRESHOLD_KMH = 1000.0
DEFAULT_NOISE_FLOOR_KM = 100.0


def haversine_km(p1: GeoPoint, p2: GeoPoint) -> float:
    """Great-circle distance in km on a sphere of radius 6371 km.

    Uses the atan2 form, which stays numerically stable for both tiny and
    near-antipodal separations.
    """
    lat1 = math.radians(p1.latitude)
    lat2 = math.radians(p2.latitude)
    dlat = math.radians(p2.latitude - p1.latitude)
    dlon = math.radians(p2.longitude - p1.longitude)
    a = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    c = 2 * math.atan2(math.sqrt(a), math.sqrt(1 - a))
    return EARTH_RADIUS_KM * c


@dataclass(frozen=True)
class TravelCheck:
    prev: GeoPoint
    curr: GeoPoint
    prev_logout_time: int
    curr_login_time: int


def implied_velocity_kmh(tc: TravelCheck) -> float:
    """Implied travel speed between consecutive sessions in km/h.

    A non-positive or sub-second gap (clock skew, overlapping sessions) is
    clamped to one second, so an instantaneous far jump reads as an extreme
    velocity instead of a division blowup.
    """
    distance = haversine_km(tc.prev, tc.curr)
    gap_ms = max(tc.curr_login_time - tc.prev_logout_time, MIN_TRAVEL_GAP_MS)
    hours = gap_ms / 3_600_000.0
    return distance / hours


@dataclass(frozen=True)
class TravelEvidence:
    distance_km: float
    hours: float
    velocity_kmh: float


def is_impossible_travel(
    tc: TravelCheck,
    threshold_kmh: float = DEFAULT_VELOCITY_THRESHOLD_KMH,
    noise_floor_km: float = DEFAULT_NOISE_FLOOR_KM,
) -> tuple[bool, TravelEvidence]:
    """Flag consecutive sessions whose implied speed exceeds the threshold.

    Jumps shorter than the noise floor are ignored outright: geo-IP databases
    routinely misplace an address by tens of km.
    """
    if threshold_kmh <= 0:
        raise ValueError("threshold_kmh must be positive")
    distance = haversine_km(tc.prev, tc.curr)
    gap_ms = max(tc.curr_login_time - tc.prev_logout_time, MIN_TRAVEL_GAP_MS)
    hours = gap_ms / 3_600_000.0
    velocity = distance / hours
    evidence = TravelEvidence(distance_km=distance, hours=hours, velocity_kmh=velocity)
    impossible = distance > noise_floor_km and velocity > threshold_kmh
    return impossible, evidence
