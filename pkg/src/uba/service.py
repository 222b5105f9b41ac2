"""HTTP ingestion API, per-tenant rate limiting, and the detection worker.

Request handlers validate, enqueue, and return immediately; the worker stitches
geo lookup, history, rule evaluation, and storage together. Every worker step
is idempotent, so at-least-once delivery yields exactly-once effects.
"""

from __future__ import annotations

import ipaddress
import time
import uuid
from dataclasses import dataclass, field
from collections import deque
from typing import Any, Callable, Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import analytics
from .geoip import GeoIpProvider
from .history import UserHistory
from .rules import RULE_IDS, RuleConfig, classify_risk, evaluate_rapid_actions
from .serialize import (
    doc_to_event,
    doc_to_session,
    event_to_doc,
    session_to_doc,
)
from .storage import SessionFilter, StorageError, Store, TenantRecord
from .types import (
    ActivityEvent,
    RiskAssessment,
    RiskLevel,
    Session,
    ValidationError,
    canonical_fingerprint,
    clamp_client_ts,
    session_duration_seconds,
)
import math

MAX_EVENT_BATCH = 500

RULE_CONFIG_RECORD = "current"


def now_ms() -> int:
    return int(time.time() * 1000)


# ---------------------------------------------------------------------------
# rate limiting

class TokenBucket:
    """Capacity 2x the per-second rate, refilled continuously."""

    def __init__(self, rate_per_s: float, clock: Callable[[], float] = time.monotonic):
        self.rate = float(rate_per_s)
        self.capacity = 2.0 * rate_per_s
        self.tokens = self.capacity
        self.clock = clock
        self._last = clock()

    def try_acquire(self, n: float = 1.0) -> bool:
        now = self.clock()
        self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
        self._last = now
        if self.tokens >= n:
            self.tokens -= n
            return True
        return False


# ---------------------------------------------------------------------------
# queue + worker

@dataclass(frozen=True)
class IngestJob:
    job_id: str
    kind: str  # session_start | event_batch | session_end
    tenant_id: str
    payload: dict[str, Any]
    enqueued_at: int


class InProcessQueue:
    """FIFO queue with a retained job log (enables replay testing)."""

    def __init__(self):
        self._pending: deque[IngestJob] = deque()
        self.log: list[IngestJob] = []

    def enqueue(self, job: IngestJob) -> None:
        self._pending.append(job)
        self.log.append(job)

    def drain(self, worker: "DetectionWorker") -> int:
        processed = 0
        while self._pending:
            worker.process(self._pending.popleft())
            processed += 1
        return processed


class DetectionWorker:
    """Consumes ingest jobs: geo lookup -> baseline snapshot -> rule assessment
    -> persistence -> history update. Replaying any job is a no-op."""

    def __init__(self, store: Store, geoip: GeoIpProvider):
        self.store = store
        self.geoip = geoip

    def _config(self, tenant_id: str) -> RuleConfig:
        doc = self.store.get("rule_configs", tenant_id, RULE_CONFIG_RECORD)
        if doc is None:
            return RuleConfig()
        return RuleConfig.from_json({k: v for k, v in doc.items() if k not in ("id", "tenant_id", "version")})

    def _history(self, config: RuleConfig) -> UserHistory:
        return UserHistory(self.store, window=config.history_window)

    def _lookup_geo(self, ip: str):
        try:
            ipaddress.ip_address(ip)
        except ValueError:
            from .types import UNKNOWN_GEO

            return UNKNOWN_GEO
        return self.geoip.lookup(ip)

    def process(self, job: IngestJob) -> None:
        handler = {
            "session_start": self._process_start,
            "event_batch": self._process_batch,
            "session_end": self._process_end,
        }.get(job.kind)
        if handler is None:
            raise ValueError(f"unknown job kind {job.kind!r}")
        handler(job)

    def _process_start(self, job: IngestJob) -> None:
        p = job.payload
        existing = self.store.get("sessions", job.tenant_id, p["session_id"])
        if existing is not None and existing.get("risk") is not None:
            return  # replay
        config = self._config(job.tenant_id)
        history = self._history(config)
        geo = self._lookup_geo(p["ip"])
        session = Session(
            session_id=p["session_id"],
            tenant_id=job.tenant_id,
            user_id=p["user_id"],
            fingerprint=canonical_fingerprint(p["fingerprint"]),
            ip=p["ip"],
            geo=geo,
            login_time=p["login_time"],
        )
        snapshot = history.snapshot(job.tenant_id, session.user_id, as_of=session.login_time)
        ip_users = history.distinct_users_from_ip(
            job.tenant_id, session.ip, config.multi_account_window_s, as_of=session.login_time
        )
        from .rules import assess

        assessment = assess(
            session, snapshot, ip_users, [], config, assessed_at=session.login_time
        )
        session.set_assessment(assessment)
        self.store.put("sessions", job.tenant_id, session.session_id, session_to_doc(session))
        self._record_suspicious(job.tenant_id, session)
        history.record_session(session)

    def _rescore(self, tenant_id: str, session: Session, config: RuleConfig) -> None:
        """Replace the rapid_actions verdict from the full event timeline and
        recompute score/level; login-time verdicts stay frozen."""
        if session.risk is None:
            return
        event_docs = self.store.query_events(tenant_id, session.session_id)
        events = [doc_to_event(d) for d in event_docs]
        rapid = evaluate_rapid_actions(events, config)
        verdicts = tuple(
            rapid if v.rule_id == "rapid_actions" else v for v in session.risk.verdicts
        )
        score = min(1.0, math.fsum(v.weight_applied for v in verdicts))
        session.set_assessment(
            RiskAssessment(
                session_id=session.session_id,
                verdicts=verdicts,
                score=score,
                level=classify_risk(score, config),
                assessed_at=session.risk.assessed_at,
            )
        )

    def _record_suspicious(self, tenant_id: str, session: Session) -> None:
        if session.risk is None or session.risk.level is RiskLevel.LOW:
            return
        from .serialize import assessment_to_doc

        record_id = f"sa-{session.session_id}"
        existing = self.store.get("suspicious", tenant_id, record_id) or {}
        doc = {
            "tenant_id": tenant_id,
            "session_id": session.session_id,
            "user_id": session.user_id,
            "level": session.risk.level.value,
            "score": session.risk.score,
            "created_at": existing.get("created_at", session.risk.assessed_at),
            "assessment": assessment_to_doc(session.risk),
            # triage fields are operator-owned; never clobbered by re-assessment
            "disposition": existing.get("disposition"),
            "note": existing.get("note"),
            "disposition_history": existing.get("disposition_history", []),
        }
        self.store.put("suspicious", tenant_id, record_id, doc)

    def _process_batch(self, job: IngestJob) -> None:
        p = job.payload
        doc = self.store.get("sessions", job.tenant_id, p["session_id"])
        if doc is None:
            return  # start job lost; FIFO ordering makes this unreachable in practice
        session = doc_to_session(doc)
        applied = 0
        for ev in p["events"]:
            if self.store.get("events", job.tenant_id, ev["event_id"]) is not None:
                continue
            event = ActivityEvent(
                event_id=ev["event_id"],
                tenant_id=job.tenant_id,
                session_id=p["session_id"],
                kind=ev["kind"],
                timestamp=max(ev["timestamp"], session.login_time),
                metadata=tuple(sorted(ev.get("metadata", {}).items())),
            )
            self.store.put("events", job.tenant_id, event.event_id, event_to_doc(event))
            session.apply_event(event)
            applied += 1
        if applied == 0:
            return  # full replay
        config = self._config(job.tenant_id)
        self._rescore(job.tenant_id, session, config)
        self.store.put("sessions", job.tenant_id, session.session_id, session_to_doc(session))
        self._record_suspicious(job.tenant_id, session)

    def _process_end(self, job: IngestJob) -> None:
        p = job.payload
        doc = self.store.get("sessions", job.tenant_id, p["session_id"])
        if doc is None:
            return
        session = doc_to_session(doc)
        if session.logout_time is not None:
            return  # already ended; first end wins
        session.logout_time = max(p["logout_time"], session.login_time)
        config = self._config(job.tenant_id)
        self._rescore(job.tenant_id, session, config)
        self.store.put("sessions", job.tenant_id, session.session_id, session_to_doc(session))
        self._record_suspicious(job.tenant_id, session)
        self._history(config).record_session(session)


# ---------------------------------------------------------------------------
# request/response models

class SessionStartBody(BaseModel):
    user_id: str
    fingerprint: dict[str, str]
    ip: Optional[str] = None
    client_ts: Optional[int] = None


class EventBody(BaseModel):
    event_id: str
    kind: str
    ts: Optional[int] = None
    metadata: dict[str, str] = Field(default_factory=dict)


class EventBatchBody(BaseModel):
    events: list[EventBody]


class SessionEndBody(BaseModel):
    client_ts: Optional[int] = None


class TriageBody(BaseModel):
    disposition: str
    note: str = ""


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field = field


# ---------------------------------------------------------------------------
# app factory

def create_app(
    store: Store,
    geoip: GeoIpProvider,
    clock_ms: Callable[[], int] = now_ms,
    bucket_clock: Callable[[], float] = time.monotonic,
) -> FastAPI:
    app = FastAPI(title="behavior analytics service")
    queue = InProcessQueue()
    worker = DetectionWorker(store, geoip)
    buckets: dict[str, TokenBucket] = {}
    # handler-side bookkeeping for idempotent accounting and idempotent ends
    accepted_sessions: dict[tuple[str, str], dict] = {}
    seen_events: dict[tuple[str, str], set[str]] = {}
    session_seq: dict[str, int] = {}

    app.state.store = store
    app.state.queue = queue
    app.state.worker = worker

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        body = {"error": exc.code, "message": exc.message}
        if exc.field:
            body["field"] = exc.field
        return JSONResponse(status_code=exc.status, content=body)

    @app.exception_handler(ValidationError)
    async def _validation_error(request: Request, exc: ValidationError):
        body = {"error": "validation", "message": str(exc)}
        if exc.field:
            body["field"] = exc.field
        return JSONResponse(status_code=400, content=body)

    @app.exception_handler(StorageError)
    async def _storage_error(request: Request, exc: StorageError):
        return JSONResponse(
            status_code=400, content={"error": "validation", "message": str(exc)}
        )

    def authenticate(x_api_key: str = Header(default="")) -> TenantRecord:
        if not x_api_key:
            raise ApiError(401, "unauthorized", "missing X-API-Key header")
        tenant = store.find_tenant_by_api_key(x_api_key)
        if tenant is None:
            raise ApiError(401, "unauthorized", "unknown API key")
        return tenant

    def rate_limit(tenant: TenantRecord) -> None:
        bucket = buckets.get(tenant.tenant_id)
        if bucket is None or bucket.rate != tenant.rate_limit_per_s:
            bucket = TokenBucket(tenant.rate_limit_per_s, clock=bucket_clock)
            buckets[tenant.tenant_id] = bucket
        if not bucket.try_acquire():
            fresh = store.get_tenant(tenant.tenant_id)
            if fresh is not None:
                doc = fresh.to_doc()
                doc["requests_over_limit"] = doc.get("requests_over_limit", 0) + 1
                store.put("clients", tenant.tenant_id, tenant.tenant_id, doc)
            raise ApiError(429, "rate_limited", "per-tenant rate limit exceeded")

    def tenant_config(tenant_id: str) -> RuleConfig:
        return worker._config(tenant_id)

    def resolve_ip(body_ip: Optional[str], request: Request) -> str:
        if body_ip:
            return body_ip
        if request.client and request.client.host:
            return request.client.host
        return "0.0.0.0"

    def session_view(tenant_id: str, session_id: str) -> dict:
        doc = store.get("sessions", tenant_id, session_id)
        pending = accepted_sessions.get((tenant_id, session_id))
        if doc is not None:
            s = doc_to_session(doc)
            if s.logout_time is None and pending and "logout_time" in pending:
                # end accepted but not yet applied by the worker
                s.logout_time = pending["logout_time"]
            view = session_to_doc(s)
            view["duration_seconds"] = session_duration_seconds(s)
            return view
        return {
            "session_id": session_id,
            "tenant_id": tenant_id,
            "user_id": pending["user_id"] if pending else None,
            "login_time": pending["login_time"] if pending else None,
            "logout_time": pending.get("logout_time") if pending else None,
            "pending": True,
        }

    @app.post("/v1/sessions", status_code=202)
    def start_session(
        body: SessionStartBody, request: Request, tenant: TenantRecord = Depends(authenticate)
    ):
        rate_limit(tenant)
        if not body.user_id:
            raise ApiError(400, "validation", "user_id must be non-empty", field="user_id")
        if not body.fingerprint:
            raise ApiError(
                400, "validation", "fingerprint attributes must be non-empty", field="fingerprint"
            )
        seq = session_seq.get(tenant.tenant_id, 0) + 1
        session_seq[tenant.tenant_id] = seq
        session_id = f"s-{seq:08d}"
        login_time = clamp_client_ts(body.client_ts, clock_ms())
        ip = resolve_ip(body.ip, request)
        accepted_sessions[(tenant.tenant_id, session_id)] = {
            "user_id": body.user_id,
            "login_time": login_time,
        }
        queue.enqueue(
            IngestJob(
                job_id=f"job-{uuid.uuid4().hex}",
                kind="session_start",
                tenant_id=tenant.tenant_id,
                payload={
                    "session_id": session_id,
                    "user_id": body.user_id,
                    "fingerprint": dict(body.fingerprint),
                    "ip": ip,
                    "login_time": login_time,
                },
                enqueued_at=login_time,
            )
        )
        fresh = store.get_tenant(tenant.tenant_id)
        if fresh is not None:
            fresh.sessions_created += 1
            store.register_tenant(fresh)
        return {"session_id": session_id, "accepted": True}

    @app.post("/v1/sessions/{session_id}/events")
    def submit_events(
        session_id: str, body: EventBatchBody, tenant: TenantRecord = Depends(authenticate)
    ):
        rate_limit(tenant)
        key = (tenant.tenant_id, session_id)
        if key not in accepted_sessions and store.get("sessions", tenant.tenant_id, session_id) is None:
            raise ApiError(404, "not_found", f"unknown session {session_id}")
        if len(body.events) > MAX_EVENT_BATCH:
            raise ApiError(
                400, "validation", f"batch exceeds {MAX_EVENT_BATCH} events", field="events"
            )
        now = clock_ms()
        login_time = accepted_sessions.get(key, {}).get("login_time", 0)
        seen = seen_events.setdefault(key, set())
        fresh_events = []
        for ev in body.events:
            if not ev.event_id:
                raise ApiError(400, "validation", "event_id must be non-empty", field="event_id")
            k = ev.kind
            if not k or k != k.lower() or not all(c.isalnum() or c == "_" for c in k):
                raise ApiError(
                    400, "validation", f"kind {k!r} must be lowercase snake_case", field="kind"
                )
            if ev.event_id in seen:
                continue
            seen.add(ev.event_id)
            ts = max(clamp_client_ts(ev.ts, now), login_time)
            fresh_events.append(
                {
                    "event_id": ev.event_id,
                    "kind": ev.kind,
                    "timestamp": ts,
                    "metadata": ev.metadata,
                }
            )
        if fresh_events:
            fresh_events.sort(key=lambda e: e["timestamp"])
            queue.enqueue(
                IngestJob(
                    job_id=f"job-{uuid.uuid4().hex}",
                    kind="event_batch",
                    tenant_id=tenant.tenant_id,
                    payload={"session_id": session_id, "events": fresh_events},
                    enqueued_at=now,
                )
            )
            fresh = store.get_tenant(tenant.tenant_id)
            if fresh is not None:
                fresh.events_ingested += len(fresh_events)
                store.register_tenant(fresh)
        return {"accepted_count": len(fresh_events)}

    @app.post("/v1/sessions/{session_id}/end")
    def end_session(
        session_id: str, body: SessionEndBody, tenant: TenantRecord = Depends(authenticate)
    ):
        rate_limit(tenant)
        key = (tenant.tenant_id, session_id)
        pending = accepted_sessions.get(key)
        stored = store.get("sessions", tenant.tenant_id, session_id)
        if pending is None and stored is None:
            raise ApiError(404, "not_found", f"unknown session {session_id}")
        already_ended = (pending and "logout_time" in pending) or (
            stored and stored.get("logout_time") is not None
        )
        if not already_ended:
            logout_time = clamp_client_ts(body.client_ts, clock_ms())
            if pending is not None:
                logout_time = max(logout_time, pending["login_time"])
                pending["logout_time"] = logout_time
            queue.enqueue(
                IngestJob(
                    job_id=f"job-{uuid.uuid4().hex}",
                    kind="session_end",
                    tenant_id=tenant.tenant_id,
                    payload={"session_id": session_id, "logout_time": logout_time},
                    enqueued_at=logout_time,
                )
            )
        return session_view(tenant.tenant_id, session_id)

    @app.get("/v1/config/rules")
    def get_rule_config(tenant: TenantRecord = Depends(authenticate)):
        config = tenant_config(tenant.tenant_id)
        doc = store.get("rule_configs", tenant.tenant_id, RULE_CONFIG_RECORD)
        out = config.to_json()
        out["version"] = doc.get("version", 0) if doc else 0
        return out

    @app.put("/v1/config/rules")
    def put_rule_config(body: dict, tenant: TenantRecord = Depends(authenticate)):
        body = dict(body)
        body.pop("version", None)
        config = RuleConfig.from_json(body)
        existing = store.get("rule_configs", tenant.tenant_id, RULE_CONFIG_RECORD)
        version = (existing.get("version", 0) if existing else 0) + 1
        doc = config.to_json()
        doc["tenant_id"] = tenant.tenant_id
        doc["version"] = version
        store.put("rule_configs", tenant.tenant_id, RULE_CONFIG_RECORD, doc)
        out = config.to_json()
        out["version"] = version
        return out

    def _time_range(time_from: Optional[int], time_to: Optional[int]) -> tuple[int, int]:
        if time_to is None:
            time_to = clock_ms() + 1
        if time_from is None:
            time_from = 0
        if time_from >= time_to:
            raise ApiError(400, "validation", "inverted time range", field="from")
        return time_from, time_to

    @app.get("/v1/analytics/summary")
    def analytics_summary(
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
        tenant: TenantRecord = Depends(authenticate),
    ):
        lo, hi = _time_range(time_from, time_to)
        return analytics.compute_summary(store, tenant.tenant_id, lo, hi).to_json()

    @app.get("/v1/analytics/daily")
    def analytics_daily(
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
        tenant: TenantRecord = Depends(authenticate),
    ):
        lo, hi = _time_range(time_from, time_to)
        series = analytics.timeseries_daily_sessions(store, tenant.tenant_id, lo, hi)
        return {"series": [{"date": d, "sessions": c} for d, c in series]}

    @app.get("/v1/analytics/distribution")
    def analytics_distribution(
        dimension: str = "country",
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
        tenant: TenantRecord = Depends(authenticate),
    ):
        lo, hi = _time_range(time_from, time_to)
        dist = analytics.distribution_by(store, tenant.tenant_id, dimension, lo, hi)
        return {
            "dimension": dimension,
            "entries": [{"key": k, "count": c, "fraction": f} for k, c, f in dist],
        }

    @app.get("/v1/suspicious")
    def suspicious_feed(
        level: Optional[str] = None,
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
        page: int = 0,
        page_size: int = 100,
        tenant: TenantRecord = Depends(authenticate),
    ):
        records = store.query_suspicious(
            tenant.tenant_id, level=level, time_from=time_from, time_to=time_to,
            page=page, page_size=page_size,
        )
        return {"records": records, "page": page, "page_size": page_size}

    @app.post("/v1/suspicious/{record_id}/triage")
    def triage(
        record_id: str, body: TriageBody, tenant: TenantRecord = Depends(authenticate)
    ):
        if body.disposition not in ("confirm", "false_positive"):
            raise ApiError(
                400, "validation", "disposition must be confirm or false_positive",
                field="disposition",
            )
        doc = store.get("suspicious", tenant.tenant_id, record_id)
        if doc is None:
            raise ApiError(404, "not_found", f"unknown suspicious record {record_id}")
        doc.setdefault("disposition_history", []).append(
            {"disposition": body.disposition, "note": body.note, "at": clock_ms()}
        )
        doc["disposition"] = body.disposition
        doc["note"] = body.note
        store.put("suspicious", tenant.tenant_id, record_id, doc)
        return doc

    @app.get("/v1/sessions")
    def list_sessions(
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
        country: Optional[str] = None,
        device_type: Optional[str] = None,
        suspicious: Optional[bool] = None,
        user_id: Optional[str] = None,
        page: int = 0,
        page_size: int = 100,
        tenant: TenantRecord = Depends(authenticate),
    ):
        flt = SessionFilter(
            time_from=time_from,
            time_to=time_to,
            country=country,
            device_type=device_type,
            suspicious=suspicious,
            user_id=user_id,
        )
        docs = store.query_sessions(tenant.tenant_id, flt, page=page, page_size=page_size)
        return {"sessions": docs, "page": page, "page_size": page_size}

    @app.post("/v1/_drain")
    def drain(tenant: TenantRecord = Depends(authenticate)):
        # test/harness hook: block until the queue is empty
        processed = queue.drain(worker)
        return {"processed": processed}

    return app


def start_background_drain(app: FastAPI, interval_s: float = 0.2) -> "threading.Thread":
    """Continuously drain the queue; used when serving for real (tests drain
    explicitly instead, for determinism)."""
    import threading

    def loop():
        while True:
            app.state.queue.drain(app.state.worker)
            time.sleep(interval_s)

    thread = threading.Thread(target=loop, daemon=True, name="detection-worker")
    thread.start()
    return thread
