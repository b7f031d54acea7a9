"""On-disk content store.

Everything lives under one data directory, no database:

    data_dir/
      index.json                     event-id hint (advisory)
      versions/<version_id>.json     one file per content version
      bots/<bot_id>/
        config.json                  bot registration
        salt                         per-bot pseudonymization salt
        checkins.json                check-in configs by user
        sessions/<user>.json         session snapshots
        events/seg-<n>.ndjson        append-only event log segments

Version ids are "<graph_id>@v<n>".  Documents are stored in canonical
serialized form; published versions never change again.

Durability: every record write goes through a temp file, fsync, and an
atomic rename; event appends are fsynced before the call returns, so an
acked event survives a kill at any point.  A torn final line left by a
crash is truncated away on the next open.  Channel user ids are hashed
with a per-bot salt before they touch disk; raw ids never do.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .engine import Session
from .graph import DialogGraph, GraphLoadError, graph_to_document, load_graph
from .scheduler import CheckinConfig
from .validate import Diagnostic, has_errors, validate_graph

__all__ = [
    "ContentStore",
    "VersionMeta",
    "StoreError",
    "NotFound",
    "Conflict",
    "PublishBlocked",
    "EVENT_KINDS",
    "EVENTS_PER_SEGMENT",
]

EVENT_KINDS = (
    "session_started",
    "message_out",
    "message_in",
    "module_entered",
    "module_completed",
    "escalation_triggered",
    "reminder_fired",
    "program_completed",
)

EVENTS_PER_SEGMENT = 1000

_VERSION_ORDINAL_RE = re.compile(r"@v(\d+)\Z")
_SEGMENT_RE = re.compile(r"seg-(\d{5})\.ndjson\Z")


class StoreError(Exception):
    def __init__(self, message: str, *, code: str = "store_error"):
        super().__init__(message)
        self.code = code


class NotFound(StoreError):
    def __init__(self, message: str, *, code: str = "not_found"):
        super().__init__(message, code=code)


class Conflict(StoreError):
    def __init__(self, message: str, *, code: str = "conflict"):
        super().__init__(message, code=code)


class PublishBlocked(StoreError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("validation errors block publishing")
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class VersionMeta:
    version_id: str
    graph_id: str
    status: str  # draft | published
    revision: int
    parent_version: str | None
    created_at: str


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def _write_file(path: Path, data: bytes) -> None:
    """Atomic durable write: temp file in the same directory, then rename."""
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    _fsync_dir(path.parent)


def _write_json(path: Path, obj) -> None:
    _write_file(path, (json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode())


def _read_json(path: Path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_instant(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


_BOT_REQUIRED = {
    "bot_id",
    "display_name",
    "program_length_days",
    "channel",
    "intents",
    "risk_lexicon",
    "published_version",
}


def check_bot_config(config: dict) -> None:
    """Shape check for a bot registration; raises StoreError."""
    if not isinstance(config, dict):
        raise StoreError("bot config must be an object")
    missing = _BOT_REQUIRED - set(config)
    if missing:
        raise StoreError(f"bot config missing fields: {', '.join(sorted(missing))}")
    channel = config["channel"]
    if not isinstance(channel, dict) or channel.get("kind") not in ("http_sync", "webhook"):
        raise StoreError("channel.kind must be 'http_sync' or 'webhook'")
    if not isinstance(channel.get("token"), str) or not channel["token"]:
        raise StoreError("channel.token must be a non-empty string")
    if channel["kind"] == "webhook" and not channel.get("url"):
        raise StoreError("webhook channel needs a url")
    length = config["program_length_days"]
    if isinstance(length, bool) or not isinstance(length, int) or length < 1:
        raise StoreError("program_length_days must be a positive integer")
    for i, intent in enumerate(config["intents"]):
        if not isinstance(intent, dict) or not intent.get("name") or not intent.get("phrases"):
            raise StoreError(f"intents[{i}] needs a name and phrases")
    if not isinstance(config["risk_lexicon"], list):
        raise StoreError("risk_lexicon must be a list of phrases")


class ContentStore:
    """One instance per data directory.  Mutations are serialized by an
    internal lock; per-user turn serialization is the caller's job."""

    def __init__(self, data_dir: str | Path, *, redaction: bool = True):
        self.data_dir = Path(data_dir)
        self.redaction = redaction
        self._lock = threading.Lock()
        self._graph_cache: dict[str, DialogGraph] = {}
        self._retry_queue: list[dict] = []
        self._segment_state: dict[str, tuple[Path, int]] = {}
        (self.data_dir / "versions").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "bots").mkdir(parents=True, exist_ok=True)
        self._next_event_id = self._recover_event_id()

    # --- paths ---

    def _version_path(self, version_id: str) -> Path:
        if "/" in version_id or version_id.startswith("."):
            raise NotFound(f"unknown version '{version_id}'")
        return self.data_dir / "versions" / f"{version_id}.json"

    def _bot_dir(self, bot_id: str) -> Path:
        if "/" in bot_id or bot_id.startswith("."):
            raise NotFound(f"unknown bot '{bot_id}'")
        return self.data_dir / "bots" / bot_id

    # --- versions ---

    def _load_record(self, version_id: str) -> dict:
        path = self._version_path(version_id)
        try:
            return _read_json(path)
        except FileNotFoundError:
            raise NotFound(f"unknown version '{version_id}'") from None

    @staticmethod
    def _meta(record: dict) -> VersionMeta:
        return VersionMeta(
            version_id=record["version_id"],
            graph_id=record["graph_id"],
            status=record["status"],
            revision=record["revision"],
            parent_version=record["parent_version"],
            created_at=record["created_at"],
        )

    def _next_ordinal(self, graph_id: str) -> int:
        top = 0
        for meta in self.list_versions(graph_id=graph_id):
            m = _VERSION_ORDINAL_RE.search(meta.version_id)
            if m is not None:
                top = max(top, int(m.group(1)))
        return top + 1

    def _parse_document(self, document) -> DialogGraph:
        if isinstance(document, (dict, list)):
            document = json.dumps(document, ensure_ascii=False)
        return load_graph(document)

    def create_version(self, document, *, now: datetime | None = None) -> VersionMeta:
        """New draft from a graph document (string or JSON-ready dict)."""
        graph = self._parse_document(document)
        with self._lock:
            ordinal = self._next_ordinal(graph.graph_id)
            version_id = f"{graph.graph_id}@v{ordinal}"
            record = {
                "version_id": version_id,
                "graph_id": graph.graph_id,
                "status": "draft",
                "revision": 1,
                "parent_version": None,
                "created_at": _iso(now) if now else _iso(datetime.now(timezone.utc)),
                "document": graph_to_document(graph),
            }
            _write_json(self._version_path(version_id), record)
            self._graph_cache[version_id] = graph
            return self._meta(record)

    def get_version(self, version_id: str) -> VersionMeta:
        return self._meta(self._load_record(version_id))

    def get_document(self, version_id: str) -> dict:
        return self._load_record(version_id)["document"]

    def get_graph(self, version_id: str) -> DialogGraph:
        cached = self._graph_cache.get(version_id)
        if cached is not None:
            return cached
        record = self._load_record(version_id)
        graph = self._parse_document(record["document"])
        self._graph_cache[version_id] = graph
        return graph

    def list_versions(self, *, graph_id: str | None = None) -> list[VersionMeta]:
        metas = []
        for path in sorted((self.data_dir / "versions").glob("*.json")):
            record = _read_json(path)
            if graph_id is None or record["graph_id"] == graph_id:
                metas.append(self._meta(record))
        return metas

    def update_draft(self, version_id: str, document, expected_revision: int) -> VersionMeta:
        graph = self._parse_document(document)
        with self._lock:
            record = self._load_record(version_id)
            if record["status"] != "draft":
                raise Conflict(
                    f"version '{version_id}' is published and immutable",
                    code="immutable_version",
                )
            if record["revision"] != expected_revision:
                raise Conflict(
                    f"stale revision {expected_revision}, current is {record['revision']}",
                    code="stale_revision",
                )
            if graph.graph_id != record["graph_id"]:
                raise StoreError("graph_id cannot change on update")
            record["revision"] += 1
            record["document"] = graph_to_document(graph)
            _write_json(self._version_path(version_id), record)
            self._graph_cache[version_id] = graph
            return self._meta(record)

    def publish_version(self, version_id: str) -> VersionMeta:
        with self._lock:
            record = self._load_record(version_id)
            if record["status"] == "published":
                raise Conflict(
                    f"version '{version_id}' is already published",
                    code="already_published",
                )
            graph = self.get_graph(version_id)
            diagnostics = validate_graph(graph)
            if has_errors(diagnostics):
                raise PublishBlocked([d for d in diagnostics if d.severity == "error"])
            record["status"] = "published"
            _write_json(self._version_path(version_id), record)
            return self._meta(record)

    def duplicate_version(self, version_id: str, *, now: datetime | None = None) -> VersionMeta:
        """Deep copy as a fresh draft; node ids gain an "@<suffix>" tag.

        The remap is deterministic (suffix is the new version ordinal) so
        duplicating the same source twice yields the same id scheme, and
        the result is isomorphic to the source by construction.
        """
        with self._lock:
            record = self._load_record(version_id)
            graph = self.get_graph(version_id)
            ordinal = self._next_ordinal(record["graph_id"])
            suffix = f"v{ordinal}"
            new_version_id = f"{record['graph_id']}@{suffix}"
            remapped = remap_node_ids(graph, suffix)
            new_record = {
                "version_id": new_version_id,
                "graph_id": record["graph_id"],
                "status": "draft",
                "revision": 1,
                "parent_version": version_id,
                "created_at": _iso(now) if now else _iso(datetime.now(timezone.utc)),
                "document": graph_to_document(remapped),
            }
            _write_json(self._version_path(new_version_id), new_record)
            self._graph_cache[new_version_id] = remapped
            return self._meta(new_record)

    # --- bots ---

    def register_bot(self, config: dict) -> None:
        check_bot_config(config)
        meta = self.get_version(config["published_version"])
        if meta.status != "published":
            raise Conflict(
                f"bot '{config['bot_id']}' binds draft version '{meta.version_id}'",
                code="unpublished_version",
            )
        with self._lock:
            bot_dir = self._bot_dir(config["bot_id"])
            (bot_dir / "sessions").mkdir(parents=True, exist_ok=True)
            (bot_dir / "events").mkdir(parents=True, exist_ok=True)
            salt_path = bot_dir / "salt"
            if not salt_path.exists():
                _write_file(salt_path, secrets.token_hex(16).encode())
            _write_json(bot_dir / "config.json", config)

    def get_bot(self, bot_id: str) -> dict:
        try:
            return _read_json(self._bot_dir(bot_id) / "config.json")
        except FileNotFoundError:
            raise NotFound(f"unknown bot '{bot_id}'") from None

    def list_bots(self) -> list[str]:
        bots = []
        for path in sorted((self.data_dir / "bots").iterdir()):
            if (path / "config.json").exists():
                bots.append(path.name)
        return bots

    def pseudonym(self, bot_id: str, raw_user_id: str) -> str:
        """Stable per-bot hash of a channel user id; raw ids never land on disk."""
        salt_path = self._bot_dir(bot_id) / "salt"
        try:
            salt = salt_path.read_text()
        except FileNotFoundError:
            raise NotFound(f"unknown bot '{bot_id}'") from None
        return hashlib.sha256(f"{salt}:{raw_user_id}".encode()).hexdigest()[:32]

    # --- sessions ---

    def _session_path(self, bot_id: str, user: str) -> Path:
        if "/" in user or user.startswith("."):
            raise NotFound("bad session key")
        return self._bot_dir(bot_id) / "sessions" / f"{user}.json"

    def load_session(self, bot_id: str, user: str) -> Session | None:
        try:
            return Session.from_dict(_read_json(self._session_path(bot_id, user)))
        except FileNotFoundError:
            return None

    def save_session(self, session: Session) -> None:
        path = self._session_path(session.bot_id, session.user_id)
        _write_json(path, session.to_dict())

    def delete_session(self, bot_id: str, user: str) -> None:
        try:
            self._session_path(bot_id, user).unlink()
        except FileNotFoundError:
            pass

    # --- check-ins ---

    def load_checkins(self, bot_id: str) -> dict[str, CheckinConfig]:
        try:
            raw = _read_json(self._bot_dir(bot_id) / "checkins.json")
        except FileNotFoundError:
            return {}
        return {user: CheckinConfig.from_dict(data) for user, data in raw.items()}

    def save_checkins(self, bot_id: str, configs: dict[str, CheckinConfig]) -> None:
        raw = {user: config.to_dict() for user, config in sorted(configs.items())}
        _write_json(self._bot_dir(bot_id) / "checkins.json", raw)

    # --- events ---

    def _segments(self, bot_id: str) -> list[Path]:
        events_dir = self._bot_dir(bot_id) / "events"
        if not events_dir.is_dir():
            return []
        return sorted(p for p in events_dir.iterdir() if _SEGMENT_RE.match(p.name))

    def _recover_event_id(self) -> int:
        top = 0
        hint_path = self.data_dir / "index.json"
        try:
            top = int(_read_json(hint_path).get("next_event_id", 1)) - 1
        except (FileNotFoundError, ValueError, json.JSONDecodeError):
            pass
        bots_dir = self.data_dir / "bots"
        if bots_dir.is_dir():
            for bot_dir in bots_dir.iterdir():
                segments = self._segments(bot_dir.name)
                if not segments:
                    continue
                self._truncate_torn_tail(segments[-1])
                for segment in reversed(segments):
                    last = self._last_event(segment)
                    if last is not None:
                        top = max(top, last["event_id"])
                        break
        return top + 1

    @staticmethod
    def _truncate_torn_tail(segment: Path) -> None:
        """Drop a partial final line left by a crash mid-append."""
        data = segment.read_bytes()
        if not data:
            return
        keep = len(data)
        if not data.endswith(b"\n"):
            nl = data.rfind(b"\n")
            keep = nl + 1 if nl >= 0 else 0
        while keep > 0:
            start = data.rfind(b"\n", 0, keep - 1) + 1
            line = data[start : keep - 1]
            try:
                json.loads(line)
                break
            except json.JSONDecodeError:
                keep = start
        if keep != len(data):
            with open(segment, "r+b") as f:
                f.truncate(keep)
                f.flush()
                os.fsync(f.fileno())

    @staticmethod
    def _last_event(segment: Path) -> dict | None:
        last = None
        with open(segment, "rb") as f:
            for line in f:
                if line.endswith(b"\n"):
                    try:
                        last = json.loads(line)
                    except json.JSONDecodeError:
                        break
        return last

    def _current_segment(self, bot_id: str) -> tuple[Path, int]:
        segments = self._segments(bot_id)
        if not segments:
            path = self._bot_dir(bot_id) / "events" / "seg-00001.ndjson"
            return path, 0
        last = segments[-1]
        with open(last, "rb") as f:
            count = sum(1 for line in f if line.endswith(b"\n"))
        if count >= EVENTS_PER_SEGMENT:
            n = int(_SEGMENT_RE.match(last.name).group(1)) + 1
            return last.with_name(f"seg-{n:05d}.ndjson"), 0
        return last, count

    def _redact(self, payload: dict) -> dict:
        if not self.redaction or "text" not in payload:
            return payload
        redacted = {"len": len(payload["text"])}
        if "risk" in payload:
            redacted["risk"] = payload["risk"]
        return redacted

    def append_events(self, events: list[dict]) -> bool:
        """Durably append a batch; False means queued for retry instead.

        Each event dict needs: ts (datetime), bot_id, user_id,
        session_id, kind, node_id, payload.  Event ids are assigned
        here, monotone across all bots.  Telemetry failure must never
        break a conversation turn, so errors queue rather than raise.
        """
        with self._lock:
            batch = self._retry_queue + list(events)
            self._retry_queue = []
            if not batch:
                return True
            try:
                self._append_locked(batch)
                return True
            except OSError:
                self._retry_queue = batch
                return False

    def _append_locked(self, batch: list[dict]) -> None:
        by_bot: dict[str, list[dict]] = {}
        for event in batch:
            by_bot.setdefault(event["bot_id"], []).append(event)
        for bot_id, bot_events in by_bot.items():
            events_dir = self._bot_dir(bot_id) / "events"
            events_dir.mkdir(parents=True, exist_ok=True)
            if bot_id in self._segment_state:
                segment, count = self._segment_state[bot_id]
            else:
                segment, count = self._current_segment(bot_id)
            lines = []
            for event in bot_events:
                record = {
                    "event_id": self._next_event_id,
                    "timestamp": _iso(event["ts"]),
                    "bot_id": bot_id,
                    "user_id": event["user_id"],
                    "session_id": event["session_id"],
                    "kind": event["kind"],
                    "node_id": event["node_id"],
                    "payload": self._redact(event["payload"]),
                }
                self._next_event_id += 1
                lines.append(json.dumps(record, ensure_ascii=False))
                count += 1
                if count >= EVENTS_PER_SEGMENT:
                    self._flush_lines(segment, lines)
                    lines = []
                    n = int(_SEGMENT_RE.match(segment.name).group(1)) + 1
                    segment = segment.with_name(f"seg-{n:05d}.ndjson")
                    count = 0
            if lines:
                self._flush_lines(segment, lines)
            self._segment_state[bot_id] = (segment, count)
        try:
            _write_json(self.data_dir / "index.json", {"next_event_id": self._next_event_id})
        except OSError:
            pass  # advisory only; recovery scans segments

    @staticmethod
    def _flush_lines(segment: Path, lines: list[str]) -> None:
        with open(segment, "ab") as f:
            f.write(("\n".join(lines) + "\n").encode())
            f.flush()
            os.fsync(f.fileno())

    def iter_events(
        self,
        bot_id: str,
        *,
        since: datetime | None = None,
        until: datetime | None = None,
    ):
        """Events for one bot ordered by event_id, optionally time-windowed."""
        self.get_bot(bot_id)
        for segment in self._segments(bot_id):
            with open(segment, "rb") as f:
                for line in f:
                    if not line.endswith(b"\n"):
                        break
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError:
                        break
                    if since is not None or until is not None:
                        ts = parse_instant(record["timestamp"])
                        if since is not None and ts < since:
                            continue
                        if until is not None and ts > until:
                            continue
                    yield record


def remap_node_ids(graph: DialogGraph, suffix: str) -> DialogGraph:
    """Rebuild a graph with every node id tagged "<id>@<suffix>".

    All references move together: edges, entry points, module entries,
    and the layout sidecar's node positions.  Module and variable names
    are not node ids and stay put.
    """
    mapping = {node_id: f"{node_id}@{suffix}" for node_id in graph.nodes}
    document = graph_to_document(graph)

    def ref(node_id: str) -> str:
        return mapping.get(node_id, node_id)

    nodes = {}
    for node_id, obj in document["nodes"].items():
        obj = json.loads(json.dumps(obj))  # deep copy
        kind = obj["kind"]
        if kind == "statement":
            if obj["next"] is not None:
                obj["next"] = ref(obj["next"])
        elif kind == "question":
            for reply in obj.get("quick_replies", []):
                reply["next"] = ref(reply["next"])
            if "intent_routes" in obj:
                obj["intent_routes"] = {
                    name: ref(target) for name, target in obj["intent_routes"].items()
                }
            obj["fallback_next"] = ref(obj["fallback_next"])
        elif kind == "condition":
            for branch in obj["branches"]:
                branch["next"] = ref(branch["next"])
            obj["else_next"] = ref(obj["else_next"])
        elif kind in ("assign", "module_call"):
            obj["next"] = ref(obj["next"])
        nodes[mapping[node_id]] = obj
    document["nodes"] = nodes

    document["entry_points"] = {
        name: ref(target) for name, target in document["entry_points"].items()
    }
    for module in document.get("modules", []):
        module["entry"] = ref(module["entry"])
    layout = document.get("layout")
    if isinstance(layout, dict) and isinstance(layout.get("nodes"), dict):
        layout["nodes"] = {ref(node_id): pos for node_id, pos in layout["nodes"].items()}

    try:
        return load_graph(json.dumps(document, ensure_ascii=False))
    except GraphLoadError as exc:  # pragma: no cover - remap is total
        raise StoreError(f"duplication produced an unloadable document: {exc}") from exc
