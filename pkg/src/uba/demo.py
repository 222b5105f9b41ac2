"""Dashboard-ready demo corpus: 4,826 sessions across 7 days, ~23.4% bounce,
312 suspicious (6.5%), BD/US/NL-heavy country mix, Desktop/Mobile/Tablet split.

Sessions are written straight to storage; suspicious ones carry a fabricated
new_device+new_country assessment (the typical real-world culprits).
"""

from __future__ import annotations

import random
import time

from .rules import RULE_IDS, RuleConfig
from .serialize import assessment_to_doc, session_to_doc
from .storage import Store
from .types import (
    GeoInfo,
    GeoPoint,
    RiskAssessment,
    RiskLevel,
    RuleVerdict,
    Session,
    canonical_fingerprint,
)

DAY_MS = 86_400_000

COUNTRIES = [
    ("BD", GeoPoint(23.8103, 90.4125), 42),
    ("US", GeoPoint(40.7128, -74.0060), 18),
    ("NL", GeoPoint(52.3676, 4.9041), 12),
    ("GB", GeoPoint(51.5074, -0.1278), 10),
    ("JP", GeoPoint(35.6762, 139.6503), 8),
    ("AU", GeoPoint(-33.8688, 151.2093), 6),
    ("IN", GeoPoint(22.5726, 88.3639), 4),
]

DEVICE_UAS = [
    ("Mozilla/5.0 (Windows NT 10.0; Win64; x64)", 45),  # Desktop
    ("Mozilla/5.0 (iPhone; CPU iPhone OS 17_0) Mobile", 39),  # Mobile
    ("Mozilla/5.0 (iPad; CPU OS 17_0) Tablet", 16),  # Tablet
]

TOTAL_SESSIONS = 4826
SUSPICIOUS_SESSIONS = 312
BOUNCE_RATE = 0.234
AVG_DURATION_S = 272
DAYS = 7
USER_POOL = 1500


def high_risk_assessment(session_id: str, at: int, config: RuleConfig) -> RiskAssessment:
    fired = {"new_device", "new_country"}
    verdicts = tuple(
        RuleVerdict(
            rule_id=r,
            fired=r in fired,
            weight_applied=config.weight(r) if r in fired else 0.0,
            evidence=(("seeded", "true"),),
        )
        for r in RULE_IDS
    )
    score = sum(v.weight_applied for v in verdicts)
    return RiskAssessment(
        session_id=session_id, verdicts=verdicts, score=score,
        level=RiskLevel.HIGH, assessed_at=at,
    )


def seed_demo_corpus(
    store: Store, tenant_id: str, seed: int = 7, end_ms: int | None = None
) -> int:
    rng = random.Random(seed)
    config = RuleConfig()
    end_ms = end_ms if end_ms is not None else int(time.time() * 1000)
    day0 = (end_ms - DAYS * DAY_MS) // DAY_MS * DAY_MS

    country_names = [c for c, _, _ in COUNTRIES]
    country_weights = [w for _, _, w in COUNTRIES]
    points = {c: p for c, p, _ in COUNTRIES}
    ua_names = [u for u, _ in DEVICE_UAS]
    ua_weights = [w for _, w in DEVICE_UAS]

    bounce_target = round(TOTAL_SESSIONS * BOUNCE_RATE)
    bounces = [True] * bounce_target + [False] * (TOTAL_SESSIONS - bounce_target)
    rng.shuffle(bounces)
    susp = [True] * SUSPICIOUS_SESSIONS + [False] * (TOTAL_SESSIONS - SUSPICIOUS_SESSIONS)
    rng.shuffle(susp)

    per_day = [TOTAL_SESSIONS // DAYS] * DAYS
    for i in range(TOTAL_SESSIONS - sum(per_day)):
        per_day[i] += 1

    idx = 0
    for day in range(DAYS):
        for user_n in rng.sample(range(USER_POOL), per_day[day]):
            country = rng.choices(country_names, weights=country_weights)[0]
            ua = rng.choices(ua_names, weights=ua_weights)[0]
            login = day0 + day * DAY_MS + rng.randint(0, DAY_MS - 3_600_000)
            duration = rng.randint(30, 2 * AVG_DURATION_S - 30)
            actions = rng.randint(0, 1) if bounces[idx] else rng.randint(2, 31)
            sid = f"seed-{idx:06d}"
            session = Session(
                session_id=sid,
                tenant_id=tenant_id,
                user_id=f"seed-user-{user_n:05d}",
                fingerprint=canonical_fingerprint(
                    {"ua": ua, "screen": "1920x1080", "tag": f"d{user_n}"}
                ),
                ip=f"10.{1 + user_n // 250}.{user_n % 250}.1",
                geo=GeoInfo(point=points[country], country=country),
                login_time=login,
                logout_time=login + duration * 1000,
                pages_viewed=actions,
                action_count=actions,
            )
            if susp[idx]:
                session.set_assessment(high_risk_assessment(sid, login, config))
                store.put(
                    "suspicious", tenant_id, f"sa-{sid}",
                    {
                        "tenant_id": tenant_id,
                        "session_id": sid,
                        "user_id": session.user_id,
                        "level": "High",
                        "score": session.risk.score,
                        "created_at": login,
                        "assessment": assessment_to_doc(session.risk),
                        "disposition": None,
                        "note": None,
                        "disposition_history": [],
                    },
                )
            store.put("sessions", tenant_id, sid, session_to_doc(session))
            idx += 1
    return idx
