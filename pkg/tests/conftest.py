import warnings

import pytest

warnings.filterwarnings("ignore", message="Using `httpx` with `starlette.testclient`")

from fastapi.testclient import TestClient

from uba.geoip import load_geoip_db
from uba.harness import write_geoip_csv
from uba.service import create_app
from uba.storage import MemoryStore, SqliteStore, TenantRecord, hash_api_key


@pytest.fixture
def demo_geoip(tmp_path):
    path = tmp_path / "geoip.csv"
    write_geoip_csv(path)
    return load_geoip_db(path)


def make_service(geoip, tenants=(("t1", "key-1", 100000),), clock_ms=None, bucket_clock=None):
    """Fresh store + app + client with registered tenants."""
    store = MemoryStore()
    for tenant_id, key, rate in tenants:
        store.register_tenant(
            TenantRecord(tenant_id=tenant_id, api_key_hash=hash_api_key(key),
                         rate_limit_per_s=rate)
        )
    kwargs = {}
    if clock_ms is not None:
        kwargs["clock_ms"] = clock_ms
    if bucket_clock is not None:
        kwargs["bucket_clock"] = bucket_clock
    app = create_app(store, geoip, **kwargs)
    return store, app, TestClient(app)


@pytest.fixture
def service(demo_geoip):
    return make_service(demo_geoip)
