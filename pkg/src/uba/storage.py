"""Tenant-scoped persistence for sessions, events, clients, users, and alerts.

Two interchangeable backends implement the same contract: an in-memory
reference store (hermetic tests, operation counters standing in for query
plans) and a SQLite document store (durable, real indexes). Every operation is
scoped by tenant_id; nothing ever crosses tenants.
"""

from __future__ import annotations

import copy
import hashlib
import hmac
import json
import sqlite3
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path
from typing import Any, Iterator, Optional

COLLECTIONS = frozenset(
    {"sessions", "events", "clients", "users", "suspicious", "ip_index", "rule_configs"}
)

MAX_PAGE_SIZE = 1000

Doc = dict[str, Any]


class StorageError(ValueError):
    pass


class TenantIsolationError(StorageError):
    """A record's tenant_id disagreed with the calling tenant scope."""


def hash_api_key(raw_key: str) -> str:
    return hashlib.sha256(raw_key.encode("utf-8")).hexdigest()


@dataclass
class TenantRecord:
    tenant_id: str
    api_key_hash: str
    plan: str = "standard"
    rate_limit_per_s: int = 100
    events_ingested: int = 0
    sessions_created: int = 0

    def __post_init__(self):
        if self.rate_limit_per_s < 1:
            raise StorageError("rate_limit_per_s must be >= 1")

    def to_doc(self) -> Doc:
        return {
            "tenant_id": self.tenant_id,
            "api_key_hash": self.api_key_hash,
            "plan": self.plan,
            "rate_limit_per_s": self.rate_limit_per_s,
            "events_ingested": self.events_ingested,
            "sessions_created": self.sessions_created,
        }

    @classmethod
    def from_doc(cls, doc: Doc) -> "TenantRecord":
        known = {f.name for f in dataclass_fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})


@dataclass(frozen=True)
class SessionFilter:
    time_from: Optional[int] = None
    time_to: Optional[int] = None
    country: Optional[str] = None
    device_type: Optional[str] = None
    suspicious: Optional[bool] = None
    user_id: Optional[str] = None

    def __post_init__(self):
        if (
            self.time_from is not None
            and self.time_to is not None
            and self.time_from > self.time_to
        ):
            raise StorageError("inverted time range")

    def matches(self, doc: Doc) -> bool:
        lt = doc["login_time"]
        if self.time_from is not None and lt < self.time_from:
            return False
        if self.time_to is not None and lt >= self.time_to:
            return False
        if self.country is not None and doc.get("country") != self.country:
            return False
        if self.device_type is not None and doc.get("device_type") != self.device_type:
            return False
        if self.suspicious is not None and bool(doc.get("suspicious")) != self.suspicious:
            return False
        if self.user_id is not None and doc.get("user_id") != self.user_id:
            return False
        return True


def _check_scope(collection: str, tenant_id: str, doc: Doc) -> None:
    if collection not in COLLECTIONS:
        raise StorageError(f"unknown collection {collection!r}")
    if doc.get("tenant_id") != tenant_id:
        raise TenantIsolationError(
            f"record tenant {doc.get('tenant_id')!r} != call scope {tenant_id!r}"
        )


def _validate_page(page: int, page_size: int) -> None:
    if page < 0:
        raise StorageError("page must be >= 0")
    if not 1 <= page_size <= MAX_PAGE_SIZE:
        raise StorageError(f"page_size must be in [1, {MAX_PAGE_SIZE}]")


class Store:
    """Storage contract shared by both backends."""

    def put(self, collection: str, tenant_id: str, record_id: str, doc: Doc) -> str:
        raise NotImplementedError

    def get(self, collection: str, tenant_id: str, record_id: str) -> Optional[Doc]:
        raise NotImplementedError

    def get_all(self, collection: str, tenant_id: str) -> list[Doc]:
        raise NotImplementedError

    def query_sessions(
        self,
        tenant_id: str,
        flt: SessionFilter = SessionFilter(),
        page: int = 0,
        page_size: int = 100,
    ) -> list[Doc]:
        raise NotImplementedError

    def query_events(self, tenant_id: str, session_id: str) -> list[Doc]:
        raise NotImplementedError

    def query_suspicious(
        self,
        tenant_id: str,
        level: Optional[str] = None,
        time_from: Optional[int] = None,
        time_to: Optional[int] = None,
        page: int = 0,
        page_size: int = 100,
    ) -> list[Doc]:
        raise NotImplementedError

    def find_tenant_by_api_key(self, raw_key: str) -> Optional[TenantRecord]:
        raise NotImplementedError

    def state_hash(self) -> str:
        """Deterministic digest of the full store contents (all tenants)."""
        raise NotImplementedError

    # -- shared helpers -------------------------------------------------

    def register_tenant(self, record: TenantRecord) -> None:
        self.put("clients", record.tenant_id, record.tenant_id, record.to_doc())

    def get_tenant(self, tenant_id: str) -> Optional[TenantRecord]:
        doc = self.get("clients", tenant_id, tenant_id)
        return TenantRecord.from_doc(doc) if doc else None

    def _suspicious_page(
        self,
        docs: Iterator[Doc],
        level: Optional[str],
        time_from: Optional[int],
        time_to: Optional[int],
        page: int,
        page_size: int,
    ) -> list[Doc]:
        _validate_page(page, page_size)
        if time_from is not None and time_to is not None and time_from > time_to:
            raise StorageError("inverted time range")
        out = [
            d
            for d in docs
            if (level is None or d.get("level") == level)
            and (time_from is None or d["created_at"] >= time_from)
            and (time_to is None or d["created_at"] < time_to)
        ]
        out.sort(key=lambda d: (-d["created_at"], d["id"]))
        start = page * page_size
        return out[start : start + page_size]


class MemoryStore(Store):
    """In-memory reference backend.

    Maintains a per-tenant login_time index for session range queries and
    counts every document examined, so tests can assert that indexed lookups
    do not degenerate into full scans.
    """

    def __init__(self):
        self._data: dict[str, dict[str, dict[str, Doc]]] = {c: {} for c in COLLECTIONS}
        # tenant -> sorted [(login_time, record_id)]
        self._session_time_index: dict[str, list[tuple[int, str]]] = {}
        self._api_key_index: dict[str, str] = {}  # api_key_hash -> tenant_id
        self.docs_scanned = 0

    def put(self, collection: str, tenant_id: str, record_id: str, doc: Doc) -> str:
        _check_scope(collection, tenant_id, doc)
        bucket = self._data[collection].setdefault(tenant_id, {})
        doc = copy.deepcopy(doc)
        doc["id"] = record_id
        if collection == "sessions":
            prev = bucket.get(record_id)
            key = (doc["login_time"], record_id)
            idx = self._session_time_index.setdefault(tenant_id, [])
            if prev is None:
                insort(idx, key)
            elif prev["login_time"] != doc["login_time"]:
                idx.remove((prev["login_time"], record_id))
                insort(idx, key)
        if collection == "clients":
            self._api_key_index[doc["api_key_hash"]] = tenant_id
        bucket[record_id] = doc
        return record_id

    def get(self, collection: str, tenant_id: str, record_id: str) -> Optional[Doc]:
        if collection not in COLLECTIONS:
            raise StorageError(f"unknown collection {collection!r}")
        doc = self._data[collection].get(tenant_id, {}).get(record_id)
        return copy.deepcopy(doc) if doc is not None else None

    def get_all(self, collection: str, tenant_id: str) -> list[Doc]:
        if collection not in COLLECTIONS:
            raise StorageError(f"unknown collection {collection!r}")
        return [copy.deepcopy(d) for d in self._data[collection].get(tenant_id, {}).values()]

    def query_sessions(
        self,
        tenant_id: str,
        flt: SessionFilter = SessionFilter(),
        page: int = 0,
        page_size: int = 100,
    ) -> list[Doc]:
        _validate_page(page, page_size)
        bucket = self._data["sessions"].get(tenant_id, {})
        idx = self._session_time_index.get(tenant_id, [])
        lo = 0 if flt.time_from is None else bisect_left(idx, (flt.time_from, ""))
        hi = len(idx) if flt.time_to is None else bisect_left(idx, (flt.time_to, ""))
        matched: list[Doc] = []
        for login_time, rid in idx[lo:hi]:
            self.docs_scanned += 1
            doc = bucket[rid]
            if flt.matches(doc):
                matched.append(doc)
        matched.sort(key=lambda d: (-d["login_time"], d["id"]))
        start = page * page_size
        return [copy.deepcopy(d) for d in matched[start : start + page_size]]

    def query_events(self, tenant_id: str, session_id: str) -> list[Doc]:
        out = []
        for doc in self._data["events"].get(tenant_id, {}).values():
            self.docs_scanned += 1
            if doc["session_id"] == session_id:
                out.append(copy.deepcopy(doc))
        out.sort(key=lambda d: (d["timestamp"], d["id"]))
        return out

    def query_suspicious(self, tenant_id, level=None, time_from=None, time_to=None,
                         page=0, page_size=100):
        docs = (copy.deepcopy(d) for d in self._data["suspicious"].get(tenant_id, {}).values())
        return self._suspicious_page(docs, level, time_from, time_to, page, page_size)

    def find_tenant_by_api_key(self, raw_key: str) -> Optional[TenantRecord]:
        key_hash = hash_api_key(raw_key)
        for stored_hash, tenant_id in self._api_key_index.items():
            if hmac.compare_digest(stored_hash, key_hash):
                return self.get_tenant(tenant_id)
        return None

    def state_hash(self) -> str:
        payload = json.dumps(self._data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class SqliteStore(Store):
    """SQLite-backed document store with real indexes on the hot paths."""

    _SESSION_COLS = ("login_time", "user_id", "country", "device_type", "suspicious")

    def __init__(self, path: str | Path = ":memory:"):
        self._conn = sqlite3.connect(str(path))
        self._conn.execute("PRAGMA journal_mode=WAL")
        cur = self._conn.cursor()
        for coll in COLLECTIONS:
            cur.execute(
                f"CREATE TABLE IF NOT EXISTS {coll} ("
                "tenant_id TEXT NOT NULL, id TEXT NOT NULL, doc TEXT NOT NULL, "
                "PRIMARY KEY (tenant_id, id))"
            )
        for col in self._SESSION_COLS:
            try:
                cur.execute(f"ALTER TABLE sessions ADD COLUMN {col}")
            except sqlite3.OperationalError:
                pass
        for stmt in (
            "ALTER TABLE events ADD COLUMN session_id",
            "ALTER TABLE events ADD COLUMN timestamp",
            "ALTER TABLE suspicious ADD COLUMN level",
            "ALTER TABLE suspicious ADD COLUMN created_at",
            "ALTER TABLE clients ADD COLUMN api_key_hash",
        ):
            try:
                cur.execute(stmt)
            except sqlite3.OperationalError:
                pass
        cur.execute(
            "CREATE INDEX IF NOT EXISTS idx_sessions_tenant_time "
            "ON sessions (tenant_id, login_time)"
        )
        cur.execute(
            "CREATE INDEX IF NOT EXISTS idx_events_tenant_session "
            "ON events (tenant_id, session_id)"
        )
        cur.execute(
            "CREATE INDEX IF NOT EXISTS idx_clients_key ON clients (api_key_hash)"
        )
        self._conn.commit()

    def put(self, collection: str, tenant_id: str, record_id: str, doc: Doc) -> str:
        _check_scope(collection, tenant_id, doc)
        doc = dict(doc)
        doc["id"] = record_id
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        extra_cols: dict[str, Any] = {}
        if collection == "sessions":
            extra_cols = {c: doc.get(c) for c in self._SESSION_COLS}
            extra_cols["suspicious"] = int(bool(doc.get("suspicious")))
        elif collection == "events":
            extra_cols = {"session_id": doc["session_id"], "timestamp": doc["timestamp"]}
        elif collection == "suspicious":
            extra_cols = {"level": doc.get("level"), "created_at": doc["created_at"]}
        elif collection == "clients":
            extra_cols = {"api_key_hash": doc["api_key_hash"]}
        cols = ["tenant_id", "id", "doc", *extra_cols]
        placeholders = ",".join("?" for _ in cols)
        self._conn.execute(
            f"INSERT OR REPLACE INTO {collection} ({','.join(cols)}) VALUES ({placeholders})",
            [tenant_id, record_id, blob, *extra_cols.values()],
        )
        self._conn.commit()
        return record_id

    def get(self, collection: str, tenant_id: str, record_id: str) -> Optional[Doc]:
        if collection not in COLLECTIONS:
            raise StorageError(f"unknown collection {collection!r}")
        row = self._conn.execute(
            f"SELECT doc FROM {collection} WHERE tenant_id=? AND id=?",
            (tenant_id, record_id),
        ).fetchone()
        return json.loads(row[0]) if row else None

    def get_all(self, collection: str, tenant_id: str) -> list[Doc]:
        if collection not in COLLECTIONS:
            raise StorageError(f"unknown collection {collection!r}")
        rows = self._conn.execute(
            f"SELECT doc FROM {collection} WHERE tenant_id=?", (tenant_id,)
        ).fetchall()
        return [json.loads(r[0]) for r in rows]

    def query_sessions(self, tenant_id, flt: SessionFilter = SessionFilter(),
                       page: int = 0, page_size: int = 100) -> list[Doc]:
        _validate_page(page, page_size)
        clauses = ["tenant_id=?"]
        params: list[Any] = [tenant_id]
        if flt.time_from is not None:
            clauses.append("login_time>=?")
            params.append(flt.time_from)
        if flt.time_to is not None:
            clauses.append("login_time<?")
            params.append(flt.time_to)
        if flt.country is not None:
            clauses.append("country=?")
            params.append(flt.country)
        if flt.device_type is not None:
            clauses.append("device_type=?")
            params.append(flt.device_type)
        if flt.suspicious is not None:
            clauses.append("suspicious=?")
            params.append(int(flt.suspicious))
        if flt.user_id is not None:
            clauses.append("user_id=?")
            params.append(flt.user_id)
        sql = (
            f"SELECT doc FROM sessions WHERE {' AND '.join(clauses)} "
            "ORDER BY login_time DESC, id ASC LIMIT ? OFFSET ?"
        )
        params += [page_size, page * page_size]
        rows = self._conn.execute(sql, params).fetchall()
        return [json.loads(r[0]) for r in rows]

    def query_plan(self, tenant_id: str, flt: SessionFilter = SessionFilter()) -> str:
        rows = self._conn.execute(
            "EXPLAIN QUERY PLAN SELECT doc FROM sessions "
            "WHERE tenant_id=? AND login_time>=? AND login_time<?",
            (tenant_id, flt.time_from or 0, flt.time_to or 2**62),
        ).fetchall()
        return " ".join(str(r) for r in rows)

    def query_events(self, tenant_id: str, session_id: str) -> list[Doc]:
        rows = self._conn.execute(
            "SELECT doc FROM events WHERE tenant_id=? AND session_id=? "
            "ORDER BY timestamp ASC, id ASC",
            (tenant_id, session_id),
        ).fetchall()
        return [json.loads(r[0]) for r in rows]

    def query_suspicious(self, tenant_id, level=None, time_from=None, time_to=None,
                         page=0, page_size=100):
        docs = (json.loads(r[0]) for r in self._conn.execute(
            "SELECT doc FROM suspicious WHERE tenant_id=?", (tenant_id,)
        ))
        return self._suspicious_page(docs, level, time_from, time_to, page, page_size)

    def find_tenant_by_api_key(self, raw_key: str) -> Optional[TenantRecord]:
        key_hash = hash_api_key(raw_key)
        rows = self._conn.execute("SELECT api_key_hash, doc FROM clients").fetchall()
        for stored_hash, blob in rows:
            if hmac.compare_digest(stored_hash, key_hash):
                return TenantRecord.from_doc(json.loads(blob))
        return None

    def state_hash(self) -> str:
        digest = hashlib.sha256()
        for coll in sorted(COLLECTIONS):
            rows = self._conn.execute(
                f"SELECT tenant_id, id, doc FROM {coll} ORDER BY tenant_id, id"
            ).fetchall()
            for row in rows:
                digest.update(json.dumps(row, sort_keys=True).encode("utf-8"))
        return digest.hexdigest()
