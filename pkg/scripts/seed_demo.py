"""Seed a SQLite store with the demo corpus and register a tenant.

    python scripts/seed_demo.py --db demo.sqlite
    python scripts/serve.py --db demo.sqlite --tenant demo:demo-key:10000
"""

from __future__ import annotations

import argparse

from uba.demo import seed_demo_corpus
from uba.storage import SqliteStore, TenantRecord, hash_api_key


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--db", required=True, help="SQLite file to seed")
    parser.add_argument("--tenant", default="demo")
    parser.add_argument("--key", default="demo-key")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    store = SqliteStore(args.db)
    store.register_tenant(
        TenantRecord(tenant_id=args.tenant, api_key_hash=hash_api_key(args.key),
                     rate_limit_per_s=10000)
    )
    count = seed_demo_corpus(store, args.tenant, seed=args.seed)
    print(f"seeded {count} sessions for tenant {args.tenant}")


if __name__ == "__main__":
    main()
