"""Operator command line.

Exit codes: 0 ok, 2 validation problem, 3 runtime fault, 4 I/O problem.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime
from pathlib import Path

from .graph import GraphLoadError, load_graph, serialize_graph
from .simulate import DEFAULT_START, run_simulation
from .store import ContentStore, NotFound, StoreError, parse_instant, remap_node_ids
from .validate import has_errors, validate_graph

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}")


def cmd_validate(args) -> int:
    text = _read_text(args.graph)
    try:
        graph = load_graph(text, lenient=args.lenient)
    except GraphLoadError as exc:
        print(f"load error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    diagnostics = validate_graph(graph)
    for d in diagnostics:
        where = d.node if d.node is not None else "-"
        print(f"{d.severity.upper()} {d.code} {where}: {d.message}")
    errors = sum(d.severity == "error" for d in diagnostics)
    warnings = len(diagnostics) - errors
    print(f"{errors} error(s), {warnings} warning(s)")
    return EXIT_VALIDATION if errors else EXIT_OK


def cmd_simulate(args) -> int:
    graph_text = _read_text(args.graph)
    script_text = _read_text(args.script)
    bot_config = None
    if args.bot_config:
        try:
            bot_config = json.loads(_read_text(args.bot_config))
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_IO, f"bad bot config: {exc}")
    start = DEFAULT_START
    if args.start:
        try:
            start = parse_instant(args.start)
        except ValueError:
            raise CliError(EXIT_IO, f"bad --start instant: {args.start!r}")
    result = run_simulation(
        graph_text,
        script_text,
        bot_config=bot_config,
        seed=args.seed,
        start=start,
        data_dir=args.data_dir,
    )
    if result.transcript:
        sys.stdout.write(result.transcript)
    if result.errors:
        sys.stderr.write(result.errors)
    return result.exit_code


def cmd_serve(args) -> int:
    from .server import load_server_config, serve

    try:
        config = load_server_config(args.config)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.config}: {exc.strerror or exc}")
    except (ValueError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_IO, f"bad server config: {exc}")
    try:
        serve(config, port=args.port)
    except StoreError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))
    return EXIT_OK


def cmd_duplicate(args) -> int:
    text = _read_text(args.src)
    try:
        graph = load_graph(text)
    except GraphLoadError as exc:
        print(f"load error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    suffix = Path(args.dst).stem
    copy = remap_node_ids(graph, suffix)
    try:
        Path(args.dst).write_text(serialize_graph(copy) + "\n", encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.dst}: {exc.strerror or exc}")
    print(f"wrote {args.dst} ({len(copy.nodes)} nodes, suffix @{suffix})")
    return EXIT_OK


def cmd_export_events(args) -> int:
    data_dir = os.environ.get("DIALOGKIT_DATA_DIR") or args.data_dir
    if not data_dir:
        raise CliError(EXIT_IO, "no data dir (use --data-dir or DIALOGKIT_DATA_DIR)")
    store = ContentStore(data_dir)

    def instant(raw: str | None, name: str) -> datetime | None:
        if raw is None:
            return None
        try:
            return parse_instant(raw)
        except ValueError:
            raise CliError(EXIT_IO, f"bad {name} instant: {raw!r}")

    since = instant(getattr(args, "from"), "--from")
    until = instant(args.to, "--to")
    try:
        for record in store.iter_events(args.bot_id, since=since, until=until):
            sys.stdout.write(json.dumps(record, ensure_ascii=False) + "\n")
    except NotFound as exc:
        raise CliError(EXIT_IO, str(exc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialogkit", description="dialog graph runtime and content tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a graph document")
    p.add_argument("graph")
    p.add_argument("--lenient", action="store_true", help="allow unknown fields")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", help="run a scripted session under a virtual clock")
    p.add_argument("graph")
    p.add_argument("script")
    p.add_argument("--bot-config", help="bot configuration JSON file")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--start", help="virtual clock start instant (ISO 8601)")
    p.add_argument("--data-dir", help="keep the run's store here instead of a temp dir")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("serve", help="run the HTTP server")
    p.add_argument("--config", required=True, help="server configuration JSON file")
    p.add_argument("--port", type=int, help="override the configured port")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("duplicate", help="copy a graph file with remapped node ids")
    p.add_argument("src")
    p.add_argument("dst")
    p.set_defaults(fn=cmd_duplicate)

    p = sub.add_parser("export-events", help="dump a bot's event log as NDJSON")
    p.add_argument("bot_id")
    p.add_argument("--data-dir")
    p.add_argument("--from", dest="from")
    p.add_argument("--to")
    p.set_defaults(fn=cmd_export_events)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(exc.message, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
