"""Command-line entry points: run a scenario to a log, or serve it live."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import scenarios as bundled
from .engine import ScenarioError, export_log, load_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _setup_logging() -> None:
    level = os.environ.get("MBOTSIM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_scenario(arg: str) -> Path:
    path = Path(arg)
    if path.is_file():
        return path
    try:
        return bundled.bundled_path(arg)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"scenario file not found: {arg} (and no bundled scenario has that name)"
        ) from None


def _load(path: Path, seed: int | None):
    doc = json.loads(path.read_text())
    if seed is not None:
        doc["seed"] = seed
    if "name" not in doc:
        doc["name"] = path.stem
    return load_scenario(doc)


def cmd_run(args) -> int:
    try:
        path = _resolve_scenario(args.scenario)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        engine = _load(path, args.seed)
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        log = engine.run()
        if args.out:
            export_log(log, args.format, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(f"scenario {engine.scenario.name}: {engine.total_steps} steps, "
          f"{engine.clock:.2f} s simulated")
    for name in log.robot_names:
        s = log.final_sample(name)
        print(f"  {name}: final pose ({s.x:.3f}, {s.y:.3f}, {s.theta:.3f})")
    arrivals = [e for e in log.events if e.kind == "arrival"]
    for e in arrivals:
        print(f"  arrival: {e.robot} at t={e.t:.2f} s")
    faults = [e for e in log.events if e.kind == "fault"]
    for e in faults:
        print(f"  fault: {e.robot} at t={e.t:.2f} s: {e.detail.get('error')}",
              file=sys.stderr)
    if args.out:
        print(f"log written to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .bridge import BridgeServer

    try:
        path = _resolve_scenario(args.scenario)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        server = BridgeServer(path, host=args.host, port=args.port,
                              speed=args.speed, broadcast_hz=args.broadcast_hz)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        server.start()
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"serving {server.engine.scenario.name} on ws://{server.host}:{server.port} "
          f"(speed x{server.speed}, broadcast {server.broadcast_hz} Hz)")
    try:
        while True:
            import time
            time.sleep(0.2)
    except KeyboardInterrupt:
        print("interrupted, shutting down")
    finally:
        server.shutdown()
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="mbotsim",
        description="Deterministic 2D multi-robot simulator: batch runs and a live bridge.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario to completion and export the log")
    run_p.add_argument("scenario", help="scenario JSON path or bundled name")
    run_p.add_argument("--out", help="write the trajectory log to this path")
    run_p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.set_defaults(func=cmd_run)

    serve_p = sub.add_parser("serve", help="serve a scenario live over WebSocket")
    serve_p.add_argument("scenario", help="scenario JSON path or bundled name")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--speed", type=float, default=1.0,
                         help="simulation speed multiplier (0 = free-running)")
    serve_p.add_argument("--broadcast-hz", type=float, default=20.0)
    serve_p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
