"""Command-line entry points.

    strutservo run <scenario> [--seed N] [--out DIR] [--realtime]
                   [--serve HOST:PORT] [--pace S] [--assets DIR]
    strutservo validate <scenario>
    strutservo replay <scenario> <command-log> [--seed N] [--out DIR]

Exit codes: 0 clean finish, 1 validation/usage error, 2 terminal fault.
Telemetry lands in <out>/<scenario-name>-<seed>/ as run.csv, events.log and
summary.json.  STRUTSERVO_LOG sets log verbosity (debug/info/warning); nothing
else in the environment is semantic.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .engine import Engine
from .gateway import LiveSession, replay_commands
from .scenario import Scenario, ScenarioError, load_scenario_file
from .telemetry import RunWriter

logger = logging.getLogger("strutservo")


def _setup_logging():
    level = os.environ.get("STRUTSERVO_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load(path: str, seed: int | None) -> Scenario:
    scenario = load_scenario_file(path)
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed & 0xFFFFFFFFFFFFFFFF)
    return scenario


def _run_dir(out: str, scenario: Scenario, suffix: str = "") -> Path:
    return Path(out) / f"{scenario.name}-{scenario.seed}{suffix}"


def _parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


def cmd_run(args) -> int:
    scenario = _load(args.scenario, args.seed)
    out_dir = _run_dir(args.out, scenario)
    pace = args.pace if args.pace is not None else (scenario.dt_s if args.realtime or args.serve else 0.0)

    if args.serve:
        host, port = _parse_addr(args.serve)
        assets = args.assets
        if assets is None:
            candidate = Path("frontend/dist")
            assets = candidate if candidate.is_dir() else None
        session = LiveSession(
            scenario, out_dir=out_dir, command_log_path=out_dir / "commands.log",
            tcp_addr=(host, port), http_addr=(host, port + 1), assets_dir=assets,
        ).start()
        print(f"gateway: tcp://{host}:{session.tcp_port}  http://{host}:{session.http_port}/")
        print(f"telemetry: {out_dir}")
        thread = session.run_paced(pace)
        try:
            thread.join()
        except KeyboardInterrupt:
            print("interrupted", file=sys.stderr)
        summary = session.finalize()
        session.stop()
    else:
        writer = RunWriter(out_dir, scenario.strut_ids(), scenario.locks.n_locks)
        engine = Engine(scenario, writer=writer)
        summary = engine.run(pace_s=pace)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0 if summary["status"] == "finished" else 2


def cmd_validate(args) -> int:
    scenario = _load(args.scenario, None)
    print(f"ok: scenario '{scenario.name}' with {len(scenario.struts)} strut(s), "
          f"{scenario.duration_ticks} ticks, seed {scenario.seed}")
    return 0


def cmd_replay(args) -> int:
    scenario = _load(args.scenario, args.seed)
    out_dir = _run_dir(args.out, scenario, suffix="-replay")
    writer = RunWriter(out_dir, scenario.strut_ids(), scenario.locks.n_locks)
    engine = Engine(scenario, writer=writer)
    with open(args.command_log, "r", encoding="utf-8") as f:
        count = replay_commands(engine, f)
    logger.info("scheduled %d replayed command(s)", count)
    summary = engine.run()
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0 if summary["status"] == "finished" else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strutservo",
                                     description="strut axial-force servo simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", default="runs", help="telemetry base directory")
    run.add_argument("--realtime", action="store_true", help="pace at dt_s per tick")
    run.add_argument("--serve", metavar="HOST:PORT", default=None,
                     help="serve the gateway (TCP at PORT, HTTP at PORT+1); implies pacing")
    run.add_argument("--pace", type=float, default=None,
                     help="wall seconds per tick (overrides --realtime pacing)")
    run.add_argument("--assets", default=None, help="console static assets directory")
    run.set_defaults(fn=cmd_run)

    val = sub.add_parser("validate", help="validate a scenario document")
    val.add_argument("scenario")
    val.set_defaults(fn=cmd_validate)

    rep = sub.add_parser("replay", help="replay a recorded command log")
    rep.add_argument("scenario")
    rep.add_argument("command_log")
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--out", default="runs")
    rep.set_defaults(fn=cmd_replay)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
