"""Scripted desk-scale simulation under a virtual clock.

A script is plain text: one user input per line, "@advance <duration>"
to step the clock (firing scheduler ticks minute by minute on the way),
"#" for comments.  The run goes through the same BotRuntime the server
uses, backed by a throwaway store, so a transcript frozen here is a
transcript of the real serving path.

Transcripts are deterministic given (graph, script, seed, start) and
are compared byte-for-byte in tests.
"""

from __future__ import annotations

import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .clock import VirtualClock
from .engine import EngineFault, OutboundMessage
from .graph import DialogGraph, GraphLoadError, graph_to_document, load_graph
from .runtime import BotRuntime
from .scheduler import format_time_of_day
from .store import ContentStore
from .validate import has_errors, validate_graph

__all__ = ["run_simulation", "SimulationResult", "ScriptError", "DEFAULT_START"]

DEFAULT_START = datetime(2026, 1, 5, 9, 0, tzinfo=timezone.utc)

_DURATION_RE = re.compile(r"(\d+)\s*([dhms])\Z")
_UNIT_SECONDS = {"d": 86400, "h": 3600, "m": 60, "s": 1}


class ScriptError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"script line {line_no}: {message}")
        self.line_no = line_no


def parse_duration(text: str) -> timedelta:
    m = _DURATION_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not a duration: {text!r} (use e.g. 90s, 30m, 2h, 1d)")
    return timedelta(seconds=int(m.group(1)) * _UNIT_SECONDS[m.group(2)])


@dataclass
class SimulationResult:
    transcript: str
    exit_code: int
    errors: str = ""
    events: list[dict] = field(default_factory=list)


def _default_bot_config() -> dict:
    return {
        "bot_id": "sim",
        "display_name": "Simulator",
        "program_length_days": 21,
        "channel": {"kind": "http_sync", "token": "sim-token"},
        "intents": [],
        "risk_lexicon": [],
        "published_version": "",
    }


def _render(lines: list[str], messages: list[OutboundMessage]) -> None:
    for message in messages:
        if message.kind == "text":
            line = f"bot> {message.body}"
            if message.quick_replies:
                line += " [" + " | ".join(message.quick_replies) + "]"
        else:
            line = f"bot> ({message.kind}) {message.body}"
        lines.append(line)


def run_simulation(
    graph_text: str,
    script_text: str,
    *,
    bot_config: dict | None = None,
    seed: int = 42,
    start: datetime = DEFAULT_START,
    data_dir: str | None = None,
    user_id: str = "sim-user",
) -> SimulationResult:
    try:
        graph = load_graph(graph_text)
    except GraphLoadError as exc:
        return SimulationResult("", 2, errors=f"load error: {exc}\n")

    diagnostics = validate_graph(graph)
    if has_errors(diagnostics):
        errors = "".join(
            f"{d.severity.upper()} {d.code} {d.node or '-'}: {d.message}\n" for d in diagnostics
        )
        return SimulationResult("", 2, errors=errors)

    if data_dir is not None:
        return _run(graph, script_text, bot_config, seed, start, data_dir, user_id)
    with tempfile.TemporaryDirectory(prefix="dialogkit-sim-") as tmp:
        return _run(graph, script_text, bot_config, seed, start, tmp, user_id)


def _run(
    graph: DialogGraph,
    script_text: str,
    bot_config: dict | None,
    seed: int,
    start: datetime,
    data_dir: str,
    user_id: str,
) -> SimulationResult:
    config = dict(bot_config) if bot_config is not None else _default_bot_config()
    store = ContentStore(data_dir)
    meta = store.create_version(graph_to_document(graph))
    store.publish_version(meta.version_id)
    config["published_version"] = meta.version_id
    store.register_bot(config)

    clock = VirtualClock(start)
    runtime = BotRuntime(store, config["bot_id"], clock=clock, seed_base=seed)

    lines: list[str] = []

    def run_ticks() -> None:
        for firing in runtime.tick():
            lines.append(
                f"-- day {firing.day_index} check-in"
                f" ({format_time_of_day(firing.time_of_day)}) --"
            )
            _render(lines, firing.messages)
            if firing.completed:
                lines.append("-- program complete --")

    try:
        for line_no, raw in enumerate(script_text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("@"):
                directive, _, arg = line.partition(" ")
                if directive != "@advance":
                    raise ScriptError(line_no, f"unknown directive {directive!r}")
                try:
                    remaining = parse_duration(arg)
                except ValueError as exc:
                    raise ScriptError(line_no, str(exc)) from None
                minute = timedelta(minutes=1)
                while remaining > timedelta(0):
                    step = min(minute, remaining)
                    clock.advance(step)
                    remaining -= step
                    run_ticks()
                continue
            lines.append(f"user> {line}")
            _render(lines, runtime.handle_inbound(user_id, line))
    except ScriptError as exc:
        return SimulationResult("\n".join(lines) + "\n" if lines else "", 4, errors=f"{exc}\n")
    except EngineFault as exc:
        return SimulationResult(
            "\n".join(lines) + "\n" if lines else "",
            3,
            errors=f"runtime fault: {exc}\n",
        )

    transcript = "\n".join(lines) + "\n" if lines else ""
    events = list(store.iter_events(config["bot_id"]))
    return SimulationResult(transcript, 0, events=events)
