"""CLI for the synthetic evaluation harness.

Usage:
    harness run --scenario all --seed 42 --users 200 --baseline 12 \
        --out report.json --api http://localhost:8000 --key <api_key>
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from .harness import DEFAULT_SCENARIO_COUNTS, SCENARIOS, HarnessRun, write_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harness")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="generate traffic and evaluate detection quality")
    run.add_argument("--scenario", default="all", choices=["all", *SCENARIOS])
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--users", type=int, default=200)
    run.add_argument("--baseline", type=int, default=12, help="baseline sessions per user")
    run.add_argument("--out", default="report.json")
    run.add_argument("--api", required=True, help="service base URL")
    run.add_argument("--key", required=True, help="tenant API key")
    run.add_argument(
        "--counts",
        default=None,
        help="comma-separated scenario=count overrides, e.g. new_device=50,mixed=25",
    )
    return parser


def parse_counts(raw: str | None) -> dict[str, int]:
    counts = dict(DEFAULT_SCENARIO_COUNTS)
    if raw:
        for pair in raw.split(","):
            name, _, value = pair.partition("=")
            if name not in SCENARIOS:
                raise SystemExit(f"unknown scenario in --counts: {name}")
            counts[name] = int(value)
    return counts


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    counts = parse_counts(args.counts)
    with httpx.Client(base_url=args.api, timeout=60.0) as client:
        run = HarnessRun(client, api_key=args.key, seed=args.seed)
        report = run.run(
            scenario=args.scenario,
            users=args.users,
            baseline_sessions=args.baseline,
            scenario_counts=counts,
        )
    write_report(report, args.out)
    print(json.dumps({k: report[k] for k in
                      ("accuracy", "precision", "recall", "f1", "false_positive_rate")},
                     indent=2))
    print(f"report written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
