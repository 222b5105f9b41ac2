"""Run the ingestion service with registered tenants.

    python scripts/serve.py --tenant demo:demo-key:1000 --port 8000
    python scripts/serve.py --db demo.sqlite --geoip geoip.csv
"""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

import uvicorn

from uba.geoip import load_geoip_db
from uba.harness import write_geoip_csv
from uba.service import create_app, start_background_drain
from uba.storage import MemoryStore, SqliteStore, TenantRecord, hash_api_key


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--db", default=None, help="SQLite path; omit for in-memory store")
    parser.add_argument("--geoip", default=None, help="GeoIP CSV; omit for the bundled demo map")
    parser.add_argument(
        "--tenant",
        action="append",
        default=[],
        metavar="ID:KEY[:RATE]",
        help="register a tenant (repeatable)",
    )
    parser.add_argument(
        "--frontend",
        default=None,
        help="serve the built dashboard from this directory at / (e.g. frontend/)",
    )
    args = parser.parse_args()

    store = SqliteStore(args.db) if args.db else MemoryStore()
    tenants = args.tenant or ["demo:demo-key:10000"]
    for spec in tenants:
        parts = spec.split(":")
        tenant_id, key = parts[0], parts[1]
        rate = int(parts[2]) if len(parts) > 2 else 1000
        store.register_tenant(
            TenantRecord(tenant_id=tenant_id, api_key_hash=hash_api_key(key),
                         rate_limit_per_s=rate)
        )
        print(f"tenant {tenant_id} registered (rate {rate}/s)")

    if args.geoip:
        geoip = load_geoip_db(args.geoip)
    else:
        with tempfile.NamedTemporaryFile(suffix=".csv", delete=False, mode="w") as fh:
            path = fh.name
        write_geoip_csv(path)
        geoip = load_geoip_db(path)
        print(f"using bundled demo geoip map ({geoip.record_count} records) at {path}")

    app = create_app(store, geoip)
    if args.frontend:
        from fastapi.staticfiles import StaticFiles

        root = Path(args.frontend)
        if not (root / "index.html").exists():
            parser.error(f"no index.html under {root}")
        app.mount("/", StaticFiles(directory=root, html=True), name="dashboard")
        print(f"serving dashboard from {root}")
    start_background_drain(app)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
