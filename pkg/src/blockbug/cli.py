"""Command line entry points: run scripted sessions, serve the protocol,
record traces."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ProtocolError
from .session import ScriptRunner, Session, parse_script
from .server import DebugServer, serve_stdio

DEFAULT_PORT = 7323
DEFAULT_TRACE_TICKS = 600  # 20 virtual seconds


def _resolved_seed(args) -> int:
    env = os.environ.get("BLOCKBUG_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _load_events(path: str) -> tuple[list[dict], int | None]:
    """Timed-events file: either a bare list of records or
    {"ticks": n, "events": [...]}. -> (records, suggested tick budget)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    ticks = None
    if isinstance(doc, dict):
        ticks = doc.get("ticks")
        doc = doc.get("events")
    if not isinstance(doc, list):
        raise SystemExit(f"{path}: events file must hold a JSON list")
    for rec in doc:
        if not isinstance(rec, dict) or "tick" not in rec or "event" not in rec:
            raise SystemExit(f"{path}: each record needs 'tick' and 'event'")
    return doc, ticks


def _cmd_run(args) -> int:
    runner = ScriptRunner(Session(seed=_resolved_seed(args)),
                          base_dir=Path(args.script).parent)
    runner.request("load_project", {"path": args.project})
    if runner.last_error is None and args.events:
        records, _ = _load_events(args.events)
        for rec in records:
            runner.request("inject_event",
                           {"tick": int(rec["tick"]), "event": rec["event"]})
    if runner.last_error is not None:
        code = 1
    else:
        try:
            code = runner.run(
                parse_script(Path(args.script).read_text(encoding="utf-8")))
        except ProtocolError as exc:
            print(f"script error: {exc}", file=sys.stderr)
            code = 2
    for line in runner.transcript:
        print(line)
    return code


def _cmd_serve(args) -> int:
    seed = _resolved_seed(args)
    if args.stdio:
        session = Session(seed=seed)
        if args.project:
            session.handle("load_project", {"path": args.project})
        serve_stdio(session)
        return 0
    server = DebugServer(port=args.port, seed=seed,
                         project_path=args.project,
                         static_dir=args.static)
    port = server.start()
    print(f"blockbug debug server on ws://127.0.0.1:{port}/ws",
          file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def _cmd_trace(args) -> int:
    session = Session(seed=_resolved_seed(args))
    result, _ = session.handle("load_project", {"path": args.project})
    if "error" in result:
        print(f"error: {result['error']['message']}", file=sys.stderr)
        return 1
    ticks = args.ticks
    if args.events:
        records, suggested = _load_events(args.events)
        if args.ticks is None and suggested is not None:
            ticks = int(suggested)
        for rec in records:
            session.handle("inject_event",
                           {"tick": int(rec["tick"]), "event": rec["event"]})
    if ticks is None:
        ticks = DEFAULT_TRACE_TICKS
    session.handle("green_flag", {})
    result, _ = session.handle("tick", {"count": ticks})
    if "error" in result:
        print(f"error: {result['error']['message']}", file=sys.stderr)
        return 1
    exported, _ = session.handle("export_trace", {"path": args.out})
    if "error" in exported:
        print(f"error: {exported['error']['message']}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({exported['entries']} entries, "
          f"stopped: {result['stop']})", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockbug",
        description="omniscient + interrogative debugger for block programs")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a session script headlessly")
    run.add_argument("project", help="project file (.nbp.json)")
    run.add_argument("--script", required=True, help="session script path")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--events", help="timed-events JSON file")
    run.set_defaults(func=_cmd_run)

    serve = sub.add_parser("serve", help="serve the debug protocol")
    serve.add_argument("--port", type=int, default=DEFAULT_PORT)
    serve.add_argument("--project", help="project to preload")
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--static", help="static directory (the built UI)")
    serve.add_argument("--stdio", action="store_true",
                       help="line-delimited JSON on stdin/stdout instead")
    serve.set_defaults(func=_cmd_serve)

    trace = sub.add_parser("trace", help="record a trace file headlessly")
    trace.add_argument("project", help="project file (.nbp.json)")
    trace.add_argument("--events", help="timed-events JSON file")
    trace.add_argument("--out", required=True, help="trace output path")
    trace.add_argument("--seed", type=int, default=0)
    trace.add_argument("--ticks", type=int, default=None,
                       help=f"tick budget (default: the events file's, "
                            f"else {DEFAULT_TRACE_TICKS})")
    trace.set_defaults(func=_cmd_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
