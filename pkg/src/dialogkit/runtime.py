"""Per-bot serving runtime: store + engine + scheduler glued together.

One BotRuntime drives one registered bot.  It owns the bot's check-in
configs, an engine per content version, and the per-user turn locks
that enforce the serial-turn contract.  Both the HTTP server and the
simulate command sit on top of this, so the two paths cannot drift.

Events raised during a turn are buffered and appended to the store as a
single durable batch before the turn's messages are handed back; the
append never raises (failures queue for retry inside the store), so
telemetry cannot break a conversation.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal

from .clock import RealClock
from .engine import DialogEngine, OutboundMessage, Session
from .intents import IntentDef, RiskLexicon
from .scheduler import due_users, mark_fired, parse_time_of_day, set_checkin
from .store import ContentStore

__all__ = ["BotRuntime", "TurnBusy", "TickFiring"]

log = logging.getLogger(__name__)


class TurnBusy(Exception):
    """A turn for this user is already in flight (serial-turn contract)."""


@dataclass
class TickFiring:
    """One check-in that fired during a tick."""

    user: str
    day_index: int
    time_of_day: int
    completed: bool
    messages: list[OutboundMessage]


class BotRuntime:
    def __init__(
        self,
        store: ContentStore,
        bot_id: str,
        *,
        clock=None,
        seed_base: int = 0,
    ):
        self.store = store
        self.bot_id = bot_id
        self.clock = clock if clock is not None else RealClock()
        self.seed_base = seed_base
        self.reload_config()
        self._engines: dict[str, DialogEngine] = {}
        self._checkins = store.load_checkins(bot_id)
        self._checkin_lock = threading.Lock()
        self._turn_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._outbox: dict[str, list[OutboundMessage]] = {}
        self._buffer = threading.local()

    def reload_config(self) -> None:
        config = self.store.get_bot(self.bot_id)
        self.config = config
        self.program_length_days = config["program_length_days"]
        self.channel = config["channel"]
        self.intents = tuple(
            IntentDef(item["name"], tuple(item["phrases"])) for item in config["intents"]
        )
        self.risk_lexicon = RiskLexicon.from_phrases(config["risk_lexicon"])

    def refresh(self) -> None:
        """Pick up a changed registration; engines rebuild lazily."""
        self.reload_config()
        self._engines = {}

    # --- engine plumbing ---

    def _engine(self, version_id: str) -> DialogEngine:
        engine = self._engines.get(version_id)
        if engine is None:
            engine = DialogEngine(
                self.store.get_graph(version_id),
                intents=self.intents,
                risk_lexicon=self.risk_lexicon,
                event_sink=self._record_event,
                on_checkin_time=self._on_checkin_time,
            )
            self._engines[version_id] = engine
        return engine

    def _record_event(self, session: Session, kind: str, node_id: str | None, payload: dict) -> None:
        self._buffer.events.append(
            {
                "ts": self.clock.now(),
                "bot_id": session.bot_id,
                "user_id": session.user_id,
                "session_id": session.session_id,
                "kind": kind,
                "node_id": node_id,
                "payload": payload,
            }
        )

    def _start_buffer(self) -> None:
        self._buffer.events = []

    def _flush_buffer(self) -> None:
        events = getattr(self._buffer, "events", [])
        self._buffer.events = []
        self.store.append_events(events)

    def _on_checkin_time(self, session: Session, value) -> None:
        try:
            minutes = parse_time_of_day(str(value))
        except ValueError:
            log.warning("bot %s: unusable check-in time %r", self.bot_id, value)
            return
        offset = session.store.get("utc_offset", Decimal(0))
        offset = int(offset) if isinstance(offset, Decimal) else 0
        with self._checkin_lock:
            set_checkin(self._checkins, self.bot_id, session.user_id, minutes, offset)
            self.store.save_checkins(self.bot_id, self._checkins)

    # --- turn handling ---

    def pseudonym(self, raw_user_id: str) -> str:
        return self.store.pseudonym(self.bot_id, raw_user_id)

    def _session_seed(self, raw_user_id: str) -> int:
        material = f"{self.seed_base}:{self.bot_id}:{raw_user_id}".encode()
        return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")

    def _turn_lock(self, user: str) -> threading.Lock:
        with self._locks_guard:
            lock = self._turn_locks.get(user)
            if lock is None:
                lock = self._turn_locks[user] = threading.Lock()
            return lock

    def handle_inbound(self, raw_user_id: str, text: str) -> list[OutboundMessage]:
        """One full user turn.  Raises TurnBusy when one is in flight."""
        user = self.pseudonym(raw_user_id)
        lock = self._turn_lock(user)
        if not lock.acquire(blocking=False):
            raise TurnBusy(user)
        try:
            self._start_buffer()
            session = self.store.load_session(self.bot_id, user)
            fresh = session is None
            if fresh:
                version_id = self.config["published_version"]
                session = self._engine(version_id).start_session(
                    session_id=f"s-{user[:16]}",
                    bot_id=self.bot_id,
                    user_id=user,
                    version_id=version_id,
                    seed=self._session_seed(raw_user_id),
                )
            engine = self._engine(session.version_id)
            origin = "onboarding" if fresh else "unprompted"
            messages = engine.handle_user_message(session, text, origin_when_idle=origin)
            self.store.save_session(session)
            self._flush_buffer()
            pending = self._outbox.pop(user, [])
            return pending + messages
        finally:
            lock.release()

    # --- scheduling ---

    def tick(self, now: datetime | None = None) -> list[TickFiring]:
        """Fire all due check-ins at ``now``, one prompted engagement each."""
        now = now if now is not None else self.clock.now()
        with self._checkin_lock:
            due = due_users(self._checkins, now)
        fired = []
        for user in due:
            lock = self._turn_lock(user)
            if not lock.acquire(blocking=False):
                continue  # user mid-turn; still due on the next tick
            try:
                with self._checkin_lock:
                    config = self._checkins.get(user)
                    if config is None or not config.active:
                        continue
                session = self.store.load_session(self.bot_id, user)
                if session is None:
                    with self._checkin_lock:
                        config.active = False
                        self.store.save_checkins(self.bot_id, self._checkins)
                    continue
                self._start_buffer()
                session.day_index += 1
                self._record_event(
                    session, "reminder_fired", None, {"day_index": session.day_index}
                )
                engine = self._engine(session.version_id)
                messages = engine.begin_engagement(session, "prompted")
                completed = session.day_index >= self.program_length_days
                with self._checkin_lock:
                    mark_fired(config, now)
                    if completed:
                        config.active = False
                        self._record_event(
                            session,
                            "program_completed",
                            None,
                            {"day_index": session.day_index},
                        )
                    self.store.save_checkins(self.bot_id, self._checkins)
                self.store.save_session(session)
                self._flush_buffer()
                fired.append(
                    TickFiring(
                        user=user,
                        day_index=session.day_index,
                        time_of_day=config.time_of_day,
                        completed=completed,
                        messages=messages,
                    )
                )
            finally:
                lock.release()
        return fired

    def queue_outbox(self, user: str, messages: list[OutboundMessage]) -> None:
        """Hold proactive messages for a synchronous channel; the next
        inbound response carries them."""
        self._outbox.setdefault(user, []).extend(messages)

    def checkin_for(self, user: str):
        with self._checkin_lock:
            return self._checkins.get(user)

    def reset_user(self, raw_user_id: str) -> None:
        user = self.pseudonym(raw_user_id)
        self.store.delete_session(self.bot_id, user)
        with self._checkin_lock:
            if user in self._checkins:
                del self._checkins[user]
                self.store.save_checkins(self.bot_id, self._checkins)
        self._outbox.pop(user, None)
