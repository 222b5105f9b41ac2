import random

import pytest

from uba.storage import (
    MAX_PAGE_SIZE,
    MemoryStore,
    SessionFilter,
    SqliteStore,
    StorageError,
    TenantIsolationError,
    TenantRecord,
    hash_api_key,
)


@pytest.fixture(params=["memory", "sqlite"])
def store(request):
    return MemoryStore() if request.param == "memory" else SqliteStore()


def session_doc(sid, tenant="t1", login=0, user="u1", country="BD",
                device_type="Desktop", suspicious=False):
    return {
        "tenant_id": tenant, "session_id": sid, "user_id": user,
        "login_time": login, "country": country, "device_type": device_type,
        "suspicious": suspicious,
    }


def put_session(store, sid, **kw):
    doc = session_doc(sid, **kw)
    store.put("sessions", doc["tenant_id"], sid, doc)
    return doc


class TestPutGet:
    def test_round_trip(self, store):
        store.put("users", "t1", "u1", {"tenant_id": "t1", "name": "x"})
        doc = store.get("users", "t1", "u1")
        assert doc["name"] == "x" and doc["id"] == "u1"

    def test_missing_returns_none(self, store):
        assert store.get("users", "t1", "nope") is None

    def test_put_overwrites(self, store):
        store.put("users", "t1", "u1", {"tenant_id": "t1", "v": 1})
        store.put("users", "t1", "u1", {"tenant_id": "t1", "v": 2})
        assert store.get("users", "t1", "u1")["v"] == 2
        assert len(store.get_all("users", "t1")) == 1

    def test_unknown_collection_rejected(self, store):
        with pytest.raises(StorageError):
            store.put("secrets", "t1", "x", {"tenant_id": "t1"})
        with pytest.raises(StorageError):
            store.get("secrets", "t1", "x")

    def test_tenant_mismatch_rejected(self, store):
        with pytest.raises(TenantIsolationError):
            store.put("users", "t1", "u1", {"tenant_id": "t2"})

    def test_cross_tenant_read_isolated(self, store):
        store.put("users", "t1", "u1", {"tenant_id": "t1", "secret": "s"})
        assert store.get("users", "t2", "u1") is None
        assert store.get_all("users", "t2") == []

    def test_memory_store_returns_copies(self):
        store = MemoryStore()
        store.put("users", "t1", "u1", {"tenant_id": "t1", "tags": ["a"]})
        doc = store.get("users", "t1", "u1")
        doc["tags"].append("b")
        assert store.get("users", "t1", "u1")["tags"] == ["a"]


class TestQuerySessions:
    def test_sorted_newest_first(self, store):
        for i, login in enumerate([300, 100, 200]):
            put_session(store, f"s-{i}", login=login)
        out = store.query_sessions("t1")
        assert [d["login_time"] for d in out] == [300, 200, 100]

    def test_time_range_half_open(self, store):
        for i in range(5):
            put_session(store, f"s-{i}", login=i * 100)
        out = store.query_sessions("t1", SessionFilter(time_from=100, time_to=300))
        assert sorted(d["login_time"] for d in out) == [100, 200]

    def test_conjunctive_filters(self, store):
        put_session(store, "a", country="BD", device_type="Mobile")
        put_session(store, "b", country="BD", device_type="Desktop")
        put_session(store, "c", country="US", device_type="Mobile")
        out = store.query_sessions("t1", SessionFilter(country="BD", device_type="Mobile"))
        assert [d["session_id"] for d in out] == ["a"]

    def test_suspicious_filter(self, store):
        put_session(store, "a", suspicious=True)
        put_session(store, "b", suspicious=False)
        out = store.query_sessions("t1", SessionFilter(suspicious=True))
        assert [d["session_id"] for d in out] == ["a"]

    def test_user_filter(self, store):
        put_session(store, "a", user="alice")
        put_session(store, "b", user="bob")
        out = store.query_sessions("t1", SessionFilter(user_id="bob"))
        assert [d["session_id"] for d in out] == ["b"]

    def test_inverted_range_rejected(self, store):
        with pytest.raises(StorageError):
            store.query_sessions("t1", SessionFilter(time_from=10, time_to=5))

    def test_pagination_partition(self, store):
        for i in range(250):
            put_session(store, f"s-{i:04d}", login=i)
        pages = [store.query_sessions("t1", page=p, page_size=100) for p in range(4)]
        assert [len(p) for p in pages] == [100, 100, 50, 0]
        ids = [d["session_id"] for page in pages for d in page]
        assert len(set(ids)) == 250

    def test_page_validation(self, store):
        with pytest.raises(StorageError):
            store.query_sessions("t1", page=-1)
        with pytest.raises(StorageError):
            store.query_sessions("t1", page_size=0)
        with pytest.raises(StorageError):
            store.query_sessions("t1", page_size=MAX_PAGE_SIZE + 1)

    def test_4826_sessions_pages_as_49(self, store):
        for i in range(4826):
            put_session(store, f"s-{i:05d}", login=i)
        sizes = []
        page = 0
        while True:
            batch = store.query_sessions("t1", page=page, page_size=100)
            if not batch:
                break
            sizes.append(len(batch))
            page += 1
        assert len(sizes) == 49
        assert sizes == [100] * 48 + [26]

    def test_tenant_scoped(self, store):
        put_session(store, "a", tenant="t1")
        put_session(store, "a", tenant="t2")
        assert len(store.query_sessions("t1")) == 1


class TestQueryEvents:
    def test_sorted_by_timestamp(self, store):
        for i, ts in enumerate([30, 10, 20]):
            store.put("events", "t1", f"e-{i}", {
                "tenant_id": "t1", "session_id": "s-1", "timestamp": ts,
            })
        store.put("events", "t1", "e-x", {
            "tenant_id": "t1", "session_id": "other", "timestamp": 5,
        })
        out = store.query_events("t1", "s-1")
        assert [d["timestamp"] for d in out] == [10, 20, 30]


class TestQuerySuspicious:
    def seed(self, store):
        for i, (level, created) in enumerate(
            [("High", 300), ("Medium", 100), ("High", 200)]
        ):
            store.put("suspicious", "t1", f"sa-{i}", {
                "tenant_id": "t1", "level": level, "created_at": created,
            })

    def test_newest_first(self, store):
        self.seed(store)
        out = store.query_suspicious("t1")
        assert [d["created_at"] for d in out] == [300, 200, 100]

    def test_level_filter(self, store):
        self.seed(store)
        out = store.query_suspicious("t1", level="High")
        assert len(out) == 2

    def test_time_window(self, store):
        self.seed(store)
        out = store.query_suspicious("t1", time_from=100, time_to=300)
        assert {d["created_at"] for d in out} == {100, 200}


class TestTenants:
    def test_register_and_find_by_key(self, store):
        rec = TenantRecord("t1", hash_api_key("secret-key"), rate_limit_per_s=50)
        store.register_tenant(rec)
        found = store.find_tenant_by_api_key("secret-key")
        assert found is not None and found.tenant_id == "t1"
        assert found.rate_limit_per_s == 50

    def test_wrong_key_not_found(self, store):
        store.register_tenant(TenantRecord("t1", hash_api_key("secret-key")))
        assert store.find_tenant_by_api_key("wrong") is None

    def test_raw_key_never_stored(self, store):
        store.register_tenant(TenantRecord("t1", hash_api_key("secret-key")))
        doc = store.get("clients", "t1", "t1")
        assert "secret-key" not in repr(doc)

    def test_rate_limit_validated(self):
        with pytest.raises(StorageError):
            TenantRecord("t1", "h", rate_limit_per_s=0)


class TestIndexes:
    def test_memory_range_query_skips_out_of_range_docs(self):
        store = MemoryStore()
        for i in range(1000):
            put_session(store, f"s-{i:04d}", login=i)
        store.docs_scanned = 0
        out = store.query_sessions("t1", SessionFilter(time_from=100, time_to=110))
        assert len(out) == 10
        assert store.docs_scanned == 10  # index narrowed the scan, not a full pass

    def test_sqlite_range_query_uses_index(self):
        store = SqliteStore()
        for i in range(100):
            put_session(store, f"s-{i:04d}", login=i)
        plan = store.query_plan("t1", SessionFilter(time_from=10, time_to=20))
        assert "idx_sessions_tenant_time" in plan

    def test_memory_index_tracks_login_time_updates(self):
        store = MemoryStore()
        put_session(store, "s-1", login=100)
        put_session(store, "s-1", login=900)
        out = store.query_sessions("t1", SessionFilter(time_from=0, time_to=500))
        assert out == []
        out = store.query_sessions("t1", SessionFilter(time_from=500))
        assert [d["session_id"] for d in out] == ["s-1"]


class TestStateHash:
    def test_same_contents_same_hash(self):
        def build(cls):
            s = cls()
            put_session(s, "s-1", login=5)
            s.put("users", "t1", "u1", {"tenant_id": "t1", "n": 1})
            return s

        for cls in (MemoryStore, SqliteStore):
            assert build(cls).state_hash() == build(cls).state_hash()

    def test_differs_after_write(self, store):
        before = store.state_hash()
        put_session(store, "s-1")
        assert store.state_hash() != before

    def test_idempotent_rewrite_preserves_hash(self, store):
        put_session(store, "s-1", login=7)
        h = store.state_hash()
        put_session(store, "s-1", login=7)
        assert store.state_hash() == h


class TestBackendEquivalence:
    def test_randomized_interleaving_same_results(self):
        rng = random.Random(1234)
        mem, sql = MemoryStore(), SqliteStore()
        tenants = ["t1", "t2", "t3"]
        for i in range(600):
            t = rng.choice(tenants)
            doc = session_doc(
                f"s-{i}", tenant=t, login=rng.randint(0, 10_000),
                user=f"u{rng.randint(0, 20)}",
                country=rng.choice(["BD", "US", "NL"]),
                suspicious=rng.random() < 0.1,
            )
            mem.put("sessions", t, doc["session_id"], doc)
            sql.put("sessions", t, doc["session_id"], doc)
        for t in tenants:
            for flt in (
                SessionFilter(),
                SessionFilter(time_from=2000, time_to=8000),
                SessionFilter(country="BD"),
                SessionFilter(suspicious=True),
                SessionFilter(user_id="u3", time_from=1000),
            ):
                a = mem.query_sessions(t, flt, page_size=1000)
                b = sql.query_sessions(t, flt, page_size=1000)
                assert [d["session_id"] for d in a] == [d["session_id"] for d in b]
