"""Command-line entry points: serve, scenario run/list/all, seed-demo,
events tail."""

from __future__ import annotations

import argparse
import json
import sys
import time
import urllib.request
from pathlib import Path

from .config import Config
from .errors import UnknownScenario
from .fixtures import build_demo_world, wire_simnet
from .harness import to_junit
from .http_api import make_server
from .scenarios import SCENARIOS, default_runner
from .service import Service
from .store import Store


def _load_config(path: str | None) -> Config:
    if path:
        return Config.load(path)
    return Config.from_env()


def cmd_serve(args) -> int:
    config = _load_config(args.config)
    if args.host:
        config.listen_host = args.host
    if args.port is not None:
        config.listen_port = args.port
    store = Store.load(args.store) if args.store else None
    service = Service(config, store=store)
    simnet = wire_simnet(service)
    if args.seed_demo:
        world = build_demo_world(service, simnet)
        print(f"seeded demo world: account={world['account_id']} "
              f"devices={sorted(simnet.devices)}")
    playground = args.playground
    if playground is None:
        default_dir = Path("frontend/dist")
        playground = str(default_dir) if default_dir.is_dir() else None
    server, base_url = make_server(
        service, config.listen_host, config.listen_port, playground_dir=playground,
    )
    print(f"listening on {base_url}", flush=True)
    if playground:
        print(f"playground at {base_url}/playground/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_scenario_list(args) -> int:
    for name in sorted(SCENARIOS):
        print(f"{name:28s} {SCENARIOS[name].description}")
    return 0


def cmd_scenario_run(args) -> int:
    transport = "http" if args.http else "in-process"
    try:
        report = default_runner().run(args.name, args.seed, transport)
    except UnknownScenario:
        print(f"unknown scenario: {args.name}", file=sys.stderr)
        print("known scenarios: " + ", ".join(sorted(SCENARIOS)), file=sys.stderr)
        return 2
    print(report.render_text(verbose=args.verbose))
    if args.report_json:
        Path(args.report_json).write_text(json.dumps(report.to_doc(), indent=2) + "\n")
    return 0 if report.passed else 1


def cmd_scenario_all(args) -> int:
    transport = "http" if args.http else "in-process"
    reports = default_runner().run_all(seed=args.seed, transport=transport)
    for report in reports:
        print(report.render_text(verbose=False))
    failed = [r.name for r in reports if not r.passed]
    if args.junit:
        Path(args.junit).write_text(to_junit(reports))
        print(f"junit report written to {args.junit}")
    print(f"{len(reports) - len(failed)}/{len(reports)} scenarios passed")
    return 0 if not failed else 1


def cmd_seed_demo(args) -> int:
    config = _load_config(args.config)
    service = Service(config)
    simnet = wire_simnet(service)
    world = build_demo_world(service, simnet)
    print(json.dumps({
        "account_id": world["account_id"],
        "phone": world["phone"],
        "devices": world["devices"],
        "kba_answers": world["kba_answers"],
    }, indent=2))
    if args.out:
        service.core.store.snapshot(args.out)
        print(f"store snapshot written to {args.out}", file=sys.stderr)
    print("tip: `da2fa serve --seed-demo` seeds the same world in a live server",
          file=sys.stderr)
    return 0


def cmd_events_tail(args) -> int:
    since = args.since
    base = args.url.rstrip("/")
    while True:
        request = urllib.request.Request(
            f"{base}/admin/events?since={since}",
            headers={"X-Admin-Token": args.admin_token},
        )
        with urllib.request.urlopen(request, timeout=10) as response:
            doc = json.loads(response.read().decode())
        for event in doc.get("events", []):
            print(json.dumps(event, sort_keys=True))
            since = max(since, event["seq"])
        if not args.follow:
            return 0
        time.sleep(args.interval)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="da2fa",
        description="Device-aware 2FA reference service and attack simulation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--config", help="config file (or set DA2FA_CONFIG)")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--seed-demo", action="store_true",
                       help="seed the playground demo world at startup")
    serve.add_argument("--store", help="load a store snapshot at startup")
    serve.add_argument("--playground", help="static playground directory to serve")
    serve.set_defaults(fn=cmd_serve)

    scenario = sub.add_parser("scenario", help="run the attack/liveness scenarios")
    ssub = scenario.add_subparsers(dest="scenario_command", required=True)

    run = ssub.add_parser("run", help="run one scenario")
    run.add_argument("name")
    run.add_argument("--seed", type=int, default=0)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--http", action="store_true",
                       help="drive the scenario over a real HTTP listener")
    group.add_argument("--in-process", action="store_true", help="default transport")
    run.add_argument("--verbose", action="store_true")
    run.add_argument("--report-json", help="write the machine-readable report here")
    run.set_defaults(fn=cmd_scenario_run)

    run_all = ssub.add_parser("all", help="run every scenario")
    run_all.add_argument("--seed", type=int, default=0)
    run_all.add_argument("--http", action="store_true")
    run_all.add_argument("--junit", help="write a JUnit-style XML report here")
    run_all.set_defaults(fn=cmd_scenario_all)

    listing = ssub.add_parser("list", help="list scenarios")
    listing.set_defaults(fn=cmd_scenario_list)

    seed_demo = sub.add_parser("seed-demo", help="describe/snapshot the demo world")
    seed_demo.add_argument("--config")
    seed_demo.add_argument("--out", help="also write a store snapshot to this path")
    seed_demo.set_defaults(fn=cmd_seed_demo)

    events = sub.add_parser("events", help="event log utilities")
    esub = events.add_subparsers(dest="events_command", required=True)
    tail = esub.add_parser("tail", help="print events from a running service")
    tail.add_argument("--url", default="http://127.0.0.1:8470")
    tail.add_argument("--admin-token", default=Config().admin_token)
    tail.add_argument("--since", type=int, default=0)
    tail.add_argument("--follow", action="store_true")
    tail.add_argument("--interval", type=float, default=1.0)
    tail.set_defaults(fn=cmd_events_tail)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
