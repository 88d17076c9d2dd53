"""Thin HTTP client for the reasonforge service.

Every subcommand except ``serve`` talks to a running service (start one
with ``reasonforge serve``); the CLI itself contains no pipeline logic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Any

import httpx

DEFAULT_SERVER = os.environ.get("REASONFORGE_SERVER", "http://127.0.0.1:8765")


def _client(server: str) -> httpx.Client:
    return httpx.Client(base_url=server, timeout=httpx.Timeout(600.0, connect=10.0))


def _print(data: Any) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def _fail(response: httpx.Response) -> int:
    try:
        detail = response.json().get("detail", response.text)
    except ValueError:
        detail = response.text
    print(f"error ({response.status_code}): {detail}", file=sys.stderr)
    return 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level=args.log_level)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    payload: dict[str, Any] = {
        "config_path": os.path.abspath(args.config),
        "resume": args.resume,
        "wait": not args.no_wait,
    }
    if args.stages:
        payload["stages"] = [s.strip() for s in args.stages.split(",") if s.strip()]
    with _client(args.server) as client:
        response = client.post("/runs", json=payload)
        if response.status_code != 200:
            return _fail(response)
        info = response.json()
        if not args.no_wait:
            _print(info)
            return 0 if info["state"] == "done" else 1
        while args.follow and info["state"] in ("queued", "running"):
            time.sleep(args.poll_interval)
            poll = client.get(f"/runs/{info['run_id']}")
            if poll.status_code != 200:
                return _fail(poll)
            info = poll.json()
        _print(info)
        return 0 if info["state"] in ("done", "queued", "running") else 1


def cmd_status(args: argparse.Namespace) -> int:
    with _client(args.server) as client:
        response = client.get(f"/runs/{args.run_id}")
        if response.status_code != 200:
            return _fail(response)
        _print(response.json())
        return 0


def cmd_validate(args: argparse.Namespace) -> int:
    with _client(args.server) as client:
        response = client.post(
            "/validate",
            json={"corpus_path": os.path.abspath(args.corpus), "strict": args.strict},
        )
        if response.status_code != 200:
            return _fail(response)
        data = response.json()
        _print(data)
        return 0 if not data["issues"] else 1


def cmd_sample(args: argparse.Namespace) -> int:
    payload = {
        "dataset_path": os.path.abspath(args.dataset),
        "mode": args.mode,
        "amount": args.amount,
        "seed": args.seed,
    }
    if args.out:
        payload["output_path"] = os.path.abspath(args.out)
    with _client(args.server) as client:
        response = client.post("/sample", json=payload)
        if response.status_code != 200:
            return _fail(response)
        _print(response.json())
        return 0


def cmd_stats(args: argparse.Namespace) -> int:
    with _client(args.server) as client:
        response = client.get(
            "/stats", params={"output_dir": os.path.abspath(args.output_dir)}
        )
        if response.status_code != 200:
            return _fail(response)
        data = response.json()
        if args.json:
            _print(data)
        else:
            print(data["report"])
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reasonforge",
        description="Client for the reasonforge data-synthesis service.",
    )
    parser.add_argument(
        "--server",
        default=DEFAULT_SERVER,
        help=f"service base URL (default {DEFAULT_SERVER}, env REASONFORGE_SERVER)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--log-level", default="warning")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("run", help="start a pipeline run")
    p.add_argument("--config", required=True, help="pipeline config JSON file")
    p.add_argument("--stages", help="comma-separated stage subset")
    p.add_argument("--resume", action="store_true", help="keep checkpoints, compute missing items")
    p.add_argument("--no-wait", action="store_true", help="return immediately with a run id")
    p.add_argument("--follow", action="store_true", help="with --no-wait: poll until the run ends")
    p.add_argument("--poll-interval", type=float, default=1.0)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("status", help="show one run")
    p.add_argument("run_id")
    p.set_defaults(handler=cmd_status)

    p = sub.add_parser("validate", help="validate a seed corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("sample", help="draw a reproducible dataset subset")
    p.add_argument("--dataset", required=True, help="exported dataset JSONL")
    p.add_argument("--mode", required=True, choices=["total_n", "problem_fraction", "case_fraction"])
    p.add_argument("--amount", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the subset to this path")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("stats", help="show the funnel report for a run directory")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--json", action="store_true", help="print the machine-readable ledger")
    p.set_defaults(handler=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except httpx.HTTPError as exc:
        print(f"cannot reach service at {args.server}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
