"""Deterministic session engine.

A session is a pure state machine over a published graph: same graph,
same seed, same inputs give byte-identical output, which is what makes
golden-transcript testing possible.  All randomness flows through a
session-owned SplitMix64 generator whose 64-bit state serializes with
the rest of the session.  The engine itself holds no per-user state and
one instance can drive any number of sessions concurrently.

Time never enters the engine; day advancement belongs to the scheduler,
which bumps ``day_index`` before starting a prompted engagement.  The
``day``, ``origin`` and ``escalated_last_engagement`` variables are
projected into the store on every read rather than stored, so they can
never drift from session state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from functools import lru_cache
from typing import Callable

from .conditions import Expr, eval_expr, parse_expr
from .graph import (
    Assign,
    Condition,
    DialogGraph,
    End,
    ModuleCall,
    ModuleReturn,
    Question,
    Statement,
    Value,
    VarRef,
    normalize_label,
)
from .intents import IntentDef, RiskLexicon, detect_risk, match_intent
from .validate import ASSIGNABLE_BUILTINS, BUILTIN_TYPES

__all__ = [
    "SplitMix64",
    "Session",
    "OutboundMessage",
    "DialogEngine",
    "EngineFault",
    "NonYieldingLoop",
    "CallStackLimit",
    "MAX_STEPS_PER_TURN",
    "MAX_CALL_DEPTH",
    "CHECKIN_VARIABLE",
]

MAX_STEPS_PER_TURN = 1000
MAX_CALL_DEPTH = 16

# Reserved store_as name; answering a question that stores here is how a
# user picks (or changes) their daily check-in time.
CHECKIN_VARIABLE = "checkin_time"

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny keyed generator with a single 64-bit word of state.

    Chosen over random.Random because the whole state is one int that
    round-trips through JSON, and the output stream is fixed for all
    time by the algorithm, not by the standard library's internals.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n


class EngineFault(RuntimeError):
    """The graph drove the engine somewhere a validated graph cannot."""


class NonYieldingLoop(EngineFault):
    """A single turn executed MAX_STEPS_PER_TURN nodes without yielding."""


class CallStackLimit(EngineFault):
    """Module calls nested deeper than MAX_CALL_DEPTH."""


@dataclass(frozen=True)
class OutboundMessage:
    kind: str  # text | image | animated_image
    body: str  # message text, or media uri
    alt_text: str = ""
    quick_replies: tuple[str, ...] = ()


@dataclass
class Session:
    """Everything the engine knows about one user on one bot."""

    session_id: str
    bot_id: str
    user_id: str
    version_id: str
    rng_state: int
    store: dict[str, Value] = field(default_factory=dict)
    position: str | None = None
    call_stack: list[tuple[str, str]] = field(default_factory=list)  # (resume node, module)
    awaiting: str | None = None  # question node id, when a reply is expected
    origin: str = "onboarding"
    day_index: int = 0
    reprompt_count: int = 0
    escalated_last_engagement: bool = False

    @property
    def engaged(self) -> bool:
        return self.awaiting is not None or self.position is not None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "bot_id": self.bot_id,
            "user_id": self.user_id,
            "version_id": self.version_id,
            "rng_state": self.rng_state,
            "store": {name: _dump_store_value(v) for name, v in self.store.items()},
            "position": self.position,
            "call_stack": [[resume, module] for resume, module in self.call_stack],
            "awaiting": self.awaiting,
            "origin": self.origin,
            "day_index": self.day_index,
            "reprompt_count": self.reprompt_count,
            "escalated_last_engagement": self.escalated_last_engagement,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Session":
        return cls(
            session_id=data["session_id"],
            bot_id=data["bot_id"],
            user_id=data["user_id"],
            version_id=data["version_id"],
            rng_state=data["rng_state"],
            store={name: _load_store_value(v) for name, v in data["store"].items()},
            position=data["position"],
            call_stack=[(resume, module) for resume, module in data["call_stack"]],
            awaiting=data["awaiting"],
            origin=data["origin"],
            day_index=data["day_index"],
            reprompt_count=data["reprompt_count"],
            escalated_last_engagement=data["escalated_last_engagement"],
        )


def _dump_store_value(value: Value) -> dict:
    # Booleans first: bool is an int subclass.
    if isinstance(value, bool):
        return {"t": "boolean", "v": value}
    if isinstance(value, Decimal):
        return {"t": "number", "v": str(value)}
    return {"t": "text", "v": value}


def _load_store_value(data: dict) -> Value:
    if data["t"] == "number":
        return Decimal(data["v"])
    return data["v"]


@lru_cache(maxsize=4096)
def _parsed(source: str) -> Expr:
    return parse_expr(source)


# Event sink signature: (session, kind, node_id, payload).  Inbound text
# rides in the payload under "text" so the storage layer can apply (or
# skip) redaction; outbound payloads carry variant indexes, never text.
EventSink = Callable[["Session", str, str | None, dict], None]


class DialogEngine:
    def __init__(
        self,
        graph: DialogGraph,
        *,
        intents: tuple[IntentDef, ...] = (),
        risk_lexicon: RiskLexicon | None = None,
        event_sink: EventSink | None = None,
        on_checkin_time: Callable[[Session, Value], None] | None = None,
    ):
        self.graph = graph
        self.intents = intents
        self.risk_lexicon = risk_lexicon
        self._sink = event_sink
        self._on_checkin_time = on_checkin_time
        self._declared = graph.declared_types()

    # --- session lifecycle ---

    def start_session(
        self,
        session_id: str,
        bot_id: str,
        user_id: str,
        version_id: str,
        *,
        seed: int,
    ) -> Session:
        session = Session(
            session_id=session_id,
            bot_id=bot_id,
            user_id=user_id,
            version_id=version_id,
            rng_state=seed & _MASK64,
        )
        for decl in self.graph.variables:
            session.store[decl.name] = decl.initial
        return session

    def begin_engagement(self, session: Session, origin: str) -> list[OutboundMessage]:
        """Enter the graph at the named entry point and run to the next yield."""
        if origin not in self.graph.entry_points:
            raise EngineFault(f"unknown entry point '{origin}'")
        session.origin = origin
        session.position = self.graph.entry_points[origin]
        session.awaiting = None
        session.call_stack.clear()
        session.reprompt_count = 0
        self._emit(session, "session_started", None, {"origin": origin, "day_index": session.day_index})
        return self._run(session)

    def handle_user_message(
        self, session: Session, text: str, *, origin_when_idle: str = "unprompted"
    ) -> list[OutboundMessage]:
        """One inbound message: risk scan, then reply matching, then run.

        A message while no engagement is active starts a fresh
        engagement at ``origin_when_idle`` (onboarding for a brand-new
        session, unprompted otherwise); that message is the knock on the
        door and is not matched against anything.
        """
        risky = self.risk_lexicon is not None and detect_risk(text, self.risk_lexicon)
        self._emit(session, "message_in", None, {"text": text, "risk": risky})

        started = False
        if not session.engaged:
            session.origin = origin_when_idle
            session.position = self.graph.entry_points[origin_when_idle]
            session.awaiting = None
            session.call_stack.clear()
            session.reprompt_count = 0
            self._emit(
                session,
                "session_started",
                None,
                {"origin": origin_when_idle, "day_index": session.day_index},
            )
            started = True

        if risky and self.graph.escalation_module is not None:
            self._interrupt_to_escalation(session)
            return self._run(session)

        if started or session.awaiting is None:
            return self._run(session)

        question = self.graph.nodes.get(session.awaiting)
        if not isinstance(question, Question):
            raise EngineFault(f"awaiting non-question node '{session.awaiting}'")
        self._answer_question(session, question, text)
        return self._run(session)

    # --- escalation ---

    def _interrupt_to_escalation(self, session: Session) -> None:
        module_name = self.graph.escalation_module
        assert module_name is not None
        module = self.graph.module_named(module_name)
        if module is None:
            raise EngineFault(f"escalation module '{module_name}' is not defined")
        resume = session.awaiting if session.awaiting is not None else session.position
        if resume is not None:
            if len(session.call_stack) >= MAX_CALL_DEPTH:
                raise CallStackLimit(f"call depth exceeds {MAX_CALL_DEPTH}")
            session.call_stack.append((resume, module_name))
        session.awaiting = None
        session.position = module.entry
        session.escalated_last_engagement = True
        self._emit(session, "escalation_triggered", resume, {"module": module_name})
        self._emit(session, "module_entered", None, {"module": module_name})

    # --- question answering ---

    def _coerce_for_store(self, name: str, text: str) -> Value | None:
        """Fit raw text to the variable's declared type; None if it can't."""
        declared = self._declared.get(name)
        trimmed = text.strip()
        if declared is None or declared == "text":
            return trimmed
        if declared == "number":
            try:
                return Decimal(trimmed)
            except InvalidOperation:
                return None
        lowered = trimmed.casefold()
        if lowered in ("yes", "true"):
            return True
        if lowered in ("no", "false"):
            return False
        return None

    def _advance(self, session: Session, question: Question, target: str, stored: Value | None) -> None:
        if question.store_as is not None and stored is not None:
            self._write_var(session, question.store_as, stored)
        session.awaiting = None
        session.reprompt_count = 0
        session.position = target

    def _answer_question(self, session: Session, question: Question, text: str) -> None:
        normalized = normalize_label(text)
        for reply in question.quick_replies:
            if normalize_label(reply.label) != normalized:
                continue
            stored = None
            if question.store_as is not None:
                stored = self._coerce_for_store(question.store_as, reply.label)
                if stored is None:
                    break  # label does not fit the variable; treat as no match
            self._advance(session, question, reply.next, stored)
            return

        if question.intent_routes:
            routes = dict(question.intent_routes)
            best = match_intent(text, self.intents)
            if best is not None and best.intent in routes:
                stored = None
                ok = True
                if question.store_as is not None:
                    stored = self._coerce_for_store(question.store_as, text)
                    ok = stored is not None
                if ok:
                    self._advance(session, question, routes[best.intent], stored)
                    return

        if not question.quick_replies and not question.intent_routes:
            # open question: any input that fits the store advances
            stored = None
            ok = True
            if question.store_as is not None:
                stored = self._coerce_for_store(question.store_as, text)
                ok = stored is not None
            if ok:
                self._advance(session, question, question.fallback_next, stored)
                return

        session.reprompt_count += 1
        if session.reprompt_count < question.reprompt_limit:
            session.position = question.id  # re-ask
        else:
            session.awaiting = None
            session.reprompt_count = 0
            session.position = question.fallback_next

    # --- store access ---

    def _effective_store(self, session: Session) -> dict[str, Value]:
        merged = dict(session.store)
        merged["day"] = Decimal(session.day_index)
        merged["origin"] = session.origin
        merged["escalated_last_engagement"] = session.escalated_last_engagement
        return merged

    def _write_var(self, session: Session, name: str, value: Value) -> None:
        if name in BUILTIN_TYPES:
            if name not in ASSIGNABLE_BUILTINS:
                raise EngineFault(f"write to read-only built-in '{name}'")
            session.escalated_last_engagement = bool(value)
            return
        session.store[name] = value
        if name == CHECKIN_VARIABLE and self._on_checkin_time is not None:
            self._on_checkin_time(session, value)

    # --- execution ---

    def _emit(self, session: Session, kind: str, node_id: str | None, payload: dict) -> None:
        if self._sink is not None:
            self._sink(session, kind, node_id, payload)

    def _run(self, session: Session) -> list[OutboundMessage]:
        """Execute nodes until a question yields or the engagement ends."""
        out: list[OutboundMessage] = []
        rng = SplitMix64(session.rng_state)
        try:
            for _ in range(MAX_STEPS_PER_TURN):
                if session.position is None:
                    return out
                node = self.graph.nodes.get(session.position)
                if node is None:
                    raise EngineFault(f"no node '{session.position}'")

                if isinstance(node, Statement):
                    variant = rng.below(len(node.text))
                    out.append(OutboundMessage("text", node.text[variant]))
                    self._emit(session, "message_out", node.id, {"variant": variant})
                    for i, media in enumerate(node.media):
                        out.append(OutboundMessage(media.kind, media.uri, media.alt_text))
                        self._emit(session, "message_out", node.id, {"media": i})
                    if node.next is None:
                        self._end_engagement(session)
                        return out
                    session.position = node.next

                elif isinstance(node, Question):
                    if session.awaiting != node.id:
                        session.reprompt_count = 0
                    variant = rng.below(len(node.prompt))
                    labels = tuple(r.label for r in node.quick_replies)
                    out.append(OutboundMessage("text", node.prompt[variant], quick_replies=labels))
                    self._emit(session, "message_out", node.id, {"variant": variant})
                    session.awaiting = node.id
                    session.position = None
                    return out

                elif isinstance(node, Condition):
                    store = self._effective_store(session)
                    target = node.else_next
                    for branch in node.branches:
                        if eval_expr(_parsed(branch.expr), store):
                            target = branch.next
                            break
                    session.position = target

                elif isinstance(node, Assign):
                    store = self._effective_store(session)
                    for assignment in node.assignments:
                        value = assignment.value
                        if isinstance(value, VarRef):
                            if value.name not in store:
                                raise EngineFault(f"read of unset variable '{value.name}'")
                            value = store[value.name]
                        self._write_var(session, assignment.variable, value)
                        store[assignment.variable] = value
                    session.position = node.next

                elif isinstance(node, ModuleCall):
                    module = self.graph.module_named(node.module)
                    if module is None:
                        raise EngineFault(f"call to unknown module '{node.module}'")
                    if len(session.call_stack) >= MAX_CALL_DEPTH:
                        raise CallStackLimit(f"call depth exceeds {MAX_CALL_DEPTH}")
                    session.call_stack.append((node.next, node.module))
                    self._emit(session, "module_entered", node.id, {"module": node.module})
                    session.position = module.entry

                elif isinstance(node, ModuleReturn):
                    if not session.call_stack:
                        raise EngineFault(f"module return at '{node.id}' with empty call stack")
                    resume, module_name = session.call_stack.pop()
                    self._emit(session, "module_completed", node.id, {"module": module_name})
                    session.position = resume

                elif isinstance(node, End):
                    self._end_engagement(session)
                    return out

                else:
                    raise EngineFault(f"unexecutable node kind {type(node).__name__}")

            raise NonYieldingLoop(
                f"turn executed {MAX_STEPS_PER_TURN} nodes without yielding"
            )
        finally:
            session.rng_state = rng.state

    def _end_engagement(self, session: Session) -> None:
        session.position = None
        session.awaiting = None
        session.call_stack.clear()
        session.reprompt_count = 0
