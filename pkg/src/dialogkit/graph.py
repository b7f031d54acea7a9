"""Dialog graph document model and JSON serialization.

A graph is a table of typed nodes plus three entry points (onboarding,
prompted, unprompted), named callable modules, variable declarations and
a persona set.  Documents are UTF-8 JSON; unknown fields are rejected
unless loading leniently.  The optional top-level "layout" section is an
opaque sidecar for canvas geometry: preserved through load/serialize,
ignored by validation.

Loading enforces structural well-formedness (schema shape, duplicate
ids, unknown kinds).  Cross-reference integrity (dangling edges and the
rest) is the validator's job, so drafts with broken references still
load and can be edited.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal

__all__ = [
    "GraphLoadError",
    "MediaRef",
    "QuickReply",
    "Branch",
    "VarRef",
    "Assignment",
    "Statement",
    "Question",
    "Condition",
    "Assign",
    "ModuleCall",
    "ModuleReturn",
    "End",
    "Node",
    "ModuleDef",
    "VariableDecl",
    "Persona",
    "DialogGraph",
    "load_graph",
    "serialize_graph",
    "graph_to_document",
    "normalize_label",
    "ENTRY_POINT_NAMES",
    "VARIABLE_TYPES",
    "DEFAULT_REPROMPT_LIMIT",
]

ENTRY_POINT_NAMES = ("onboarding", "prompted", "unprompted")
VARIABLE_TYPES = ("number", "text", "boolean")
DEFAULT_REPROMPT_LIMIT = 2

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Value = Decimal | str | bool


class GraphLoadError(ValueError):
    """A document failed to load: syntax, schema shape, or duplicate ids."""


def normalize_label(label: str) -> str:
    """Quick-reply label normalization: trim + case-fold."""
    return label.strip().casefold()


@dataclass(frozen=True)
class MediaRef:
    kind: str  # image | animated_image
    uri: str
    alt_text: str = ""


@dataclass(frozen=True)
class QuickReply:
    label: str
    next: str


@dataclass(frozen=True)
class Branch:
    expr: str
    next: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Assignment:
    variable: str
    value: Value | VarRef


@dataclass(frozen=True)
class Statement:
    id: str
    text: tuple[str, ...]
    media: tuple[MediaRef, ...] = ()
    next: str | None = None  # None means end-of-conversation

    KIND = "statement"


@dataclass(frozen=True)
class Question:
    id: str
    prompt: tuple[str, ...]
    fallback_next: str
    quick_replies: tuple[QuickReply, ...] = ()
    store_as: str | None = None
    intent_routes: tuple[tuple[str, str], ...] = ()  # (intent name, node id)
    reprompt_limit: int = DEFAULT_REPROMPT_LIMIT

    KIND = "question"


@dataclass(frozen=True)
class Condition:
    id: str
    branches: tuple[Branch, ...]
    else_next: str

    KIND = "condition"


@dataclass(frozen=True)
class Assign:
    id: str
    assignments: tuple[Assignment, ...]
    next: str

    KIND = "assign"


@dataclass(frozen=True)
class ModuleCall:
    id: str
    module: str
    next: str

    KIND = "module_call"


@dataclass(frozen=True)
class ModuleReturn:
    id: str

    KIND = "module_return"


@dataclass(frozen=True)
class End:
    id: str

    KIND = "end"


Node = Statement | Question | Condition | Assign | ModuleCall | ModuleReturn | End

NODE_KINDS = ("statement", "question", "condition", "assign", "module_call", "module_return", "end")


@dataclass(frozen=True)
class ModuleDef:
    name: str
    entry: str
    description: str = ""


@dataclass(frozen=True)
class VariableDecl:
    name: str
    type: str  # number | text | boolean
    initial: Value


@dataclass(frozen=True)
class Persona:
    name: str
    avatars: tuple[str, ...] = ()


@dataclass
class DialogGraph:
    """Immutable after load; safe to share across concurrent sessions."""

    graph_id: str
    nodes: dict[str, Node]
    entry_points: dict[str, str]
    modules: tuple[ModuleDef, ...] = ()
    escalation_module: str | None = None
    variables: tuple[VariableDecl, ...] = ()
    personas: tuple[Persona, ...] = ()
    layout: dict = field(default_factory=dict, compare=False)

    def module_named(self, name: str) -> ModuleDef | None:
        for mod in self.modules:
            if mod.name == name:
                return mod
        return None

    def declared_types(self) -> dict[str, str]:
        return {decl.name: decl.type for decl in self.variables}


# --- loading ---


class _DuplicateKey(Exception):
    def __init__(self, key: str):
        self.key = key


def _pairs_hook(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise _DuplicateKey(key)
        seen[key] = value
    return seen


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise GraphLoadError(f"missing field '{key}' in {where}")
    return obj[key]


def _check_fields(obj: dict, allowed: set[str], where: str, strict: bool):
    if not strict:
        return
    for key in obj:
        if key not in allowed:
            raise GraphLoadError(f"unknown field '{key}' in {where}")


def _as_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise GraphLoadError(f"{where} must be a string")
    return value


def _as_number(value, where: str) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        raise GraphLoadError(f"{where} must be a number")
    return Decimal(value) if isinstance(value, int) else value


def _load_variants(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value:
        raise GraphLoadError(f"{where} must be a non-empty list of strings")
    variants = []
    for i, item in enumerate(value):
        text = _as_str(item, f"{where}[{i}]")
        if not text.strip():
            raise GraphLoadError(f"{where}[{i}] is empty")
        variants.append(text)
    return tuple(variants)


def _load_media(value, where: str, strict: bool) -> tuple[MediaRef, ...]:
    if not isinstance(value, list):
        raise GraphLoadError(f"{where} must be a list")
    refs = []
    for i, item in enumerate(value):
        at = f"{where}[{i}]"
        if not isinstance(item, dict):
            raise GraphLoadError(f"{at} must be an object")
        _check_fields(item, {"kind", "uri", "alt_text"}, at, strict)
        kind = _as_str(_require(item, "kind", at), f"{at}.kind")
        if kind not in ("image", "animated_image"):
            raise GraphLoadError(f"{at}.kind must be 'image' or 'animated_image'")
        uri = _as_str(_require(item, "uri", at), f"{at}.uri")
        if not uri:
            raise GraphLoadError(f"{at}.uri is empty")
        refs.append(MediaRef(kind, uri, _as_str(item.get("alt_text", ""), f"{at}.alt_text")))
    return tuple(refs)


def _load_assign_value(value, where: str) -> Value | VarRef:
    if isinstance(value, dict):
        if set(value) != {"var"}:
            raise GraphLoadError(f"{where} variable reference must be {{\"var\": name}}")
        return VarRef(_as_str(value["var"], f"{where}.var"))
    if isinstance(value, bool) or isinstance(value, str):
        return value
    if isinstance(value, (int, Decimal)):
        return Decimal(value) if isinstance(value, int) else value
    raise GraphLoadError(f"{where} must be a literal or a variable reference")


def _load_node(node_id: str, obj: dict, strict: bool) -> Node:
    where = f"node '{node_id}'"
    if not isinstance(obj, dict):
        raise GraphLoadError(f"{where} must be an object")
    kind = _as_str(_require(obj, "kind", where), f"{where}.kind")

    if kind == "statement":
        _check_fields(obj, {"kind", "text", "media", "next"}, where, strict)
        nxt = obj.get("next")
        if nxt is not None:
            nxt = _as_str(nxt, f"{where}.next")
        return Statement(
            id=node_id,
            text=_load_variants(_require(obj, "text", where), f"{where}.text"),
            media=_load_media(obj.get("media", []), f"{where}.media", strict),
            next=nxt,
        )

    if kind == "question":
        _check_fields(
            obj,
            {"kind", "prompt", "quick_replies", "store_as", "intent_routes", "fallback_next", "reprompt_limit"},
            where,
            strict,
        )
        replies = []
        seen_labels = set()
        for i, item in enumerate(obj.get("quick_replies", [])):
            at = f"{where}.quick_replies[{i}]"
            if not isinstance(item, dict):
                raise GraphLoadError(f"{at} must be an object")
            _check_fields(item, {"label", "next"}, at, strict)
            label = _as_str(_require(item, "label", at), f"{at}.label")
            norm = normalize_label(label)
            if norm in seen_labels:
                raise GraphLoadError(f"duplicate quick-reply label '{label}' in {where}")
            seen_labels.add(norm)
            replies.append(QuickReply(label, _as_str(_require(item, "next", at), f"{at}.next")))
        routes = obj.get("intent_routes", {})
        if not isinstance(routes, dict):
            raise GraphLoadError(f"{where}.intent_routes must be an object")
        store_as = obj.get("store_as")
        if store_as is not None:
            store_as = _as_str(store_as, f"{where}.store_as")
        limit = obj.get("reprompt_limit", DEFAULT_REPROMPT_LIMIT)
        if isinstance(limit, bool) or not isinstance(limit, int) or limit < 0:
            raise GraphLoadError(f"{where}.reprompt_limit must be a non-negative integer")
        return Question(
            id=node_id,
            prompt=_load_variants(_require(obj, "prompt", where), f"{where}.prompt"),
            quick_replies=tuple(replies),
            store_as=store_as,
            intent_routes=tuple(
                (name, _as_str(target, f"{where}.intent_routes['{name}']"))
                for name, target in routes.items()
            ),
            fallback_next=_as_str(_require(obj, "fallback_next", where), f"{where}.fallback_next"),
            reprompt_limit=limit,
        )

    if kind == "condition":
        _check_fields(obj, {"kind", "branches", "else_next"}, where, strict)
        raw = _require(obj, "branches", where)
        if not isinstance(raw, list) or not raw:
            raise GraphLoadError(f"{where} needs at least one branch")
        branches = []
        for i, item in enumerate(raw):
            at = f"{where}.branches[{i}]"
            if not isinstance(item, dict):
                raise GraphLoadError(f"{at} must be an object")
            _check_fields(item, {"expr", "next"}, at, strict)
            branches.append(
                Branch(
                    _as_str(_require(item, "expr", at), f"{at}.expr"),
                    _as_str(_require(item, "next", at), f"{at}.next"),
                )
            )
        return Condition(
            id=node_id,
            branches=tuple(branches),
            else_next=_as_str(_require(obj, "else_next", where), f"{where}.else_next"),
        )

    if kind == "assign":
        _check_fields(obj, {"kind", "assignments", "next"}, where, strict)
        raw = _require(obj, "assignments", where)
        if not isinstance(raw, list) or not raw:
            raise GraphLoadError(f"{where} needs at least one assignment")
        assignments = []
        for i, item in enumerate(raw):
            at = f"{where}.assignments[{i}]"
            if not isinstance(item, dict):
                raise GraphLoadError(f"{at} must be an object")
            _check_fields(item, {"variable", "value"}, at, strict)
            assignments.append(
                Assignment(
                    _as_str(_require(item, "variable", at), f"{at}.variable"),
                    _load_assign_value(_require(item, "value", at), f"{at}.value"),
                )
            )
        return Assign(
            id=node_id,
            assignments=tuple(assignments),
            next=_as_str(_require(obj, "next", where), f"{where}.next"),
        )

    if kind == "module_call":
        _check_fields(obj, {"kind", "module", "next"}, where, strict)
        return ModuleCall(
            id=node_id,
            module=_as_str(_require(obj, "module", where), f"{where}.module"),
            next=_as_str(_require(obj, "next", where), f"{where}.next"),
        )

    if kind == "module_return":
        _check_fields(obj, {"kind"}, where, strict)
        return ModuleReturn(id=node_id)

    if kind == "end":
        _check_fields(obj, {"kind"}, where, strict)
        return End(id=node_id)

    raise GraphLoadError(f"unknown node kind '{kind}' in {where}")


_TOP_LEVEL_FIELDS = {
    "graph_id",
    "variables",
    "entry_points",
    "modules",
    "escalation_module",
    "personas",
    "nodes",
    "layout",
}


def load_graph(document: str, *, lenient: bool = False) -> DialogGraph:
    """Parse a serialized graph document.

    Raises GraphLoadError for syntax errors (with line/position),
    duplicate node ids, unknown node kinds, missing entry points, and,
    unless ``lenient``, unknown fields.
    """
    strict = not lenient
    try:
        doc = json.loads(document, parse_float=Decimal, object_pairs_hook=_pairs_hook)
    except _DuplicateKey as dup:
        fallback = None
        try:
            fallback = json.loads(document, parse_float=Decimal)
        except json.JSONDecodeError:
            pass
        if isinstance(fallback, dict) and dup.key in fallback.get("nodes", {}):
            raise GraphLoadError(f"duplicate node id {dup.key}") from None
        raise GraphLoadError(f"duplicate key '{dup.key}' in document") from None
    except json.JSONDecodeError as err:
        raise GraphLoadError(f"syntax error: {err.msg} at line {err.lineno} column {err.colno}") from None

    if not isinstance(doc, dict):
        raise GraphLoadError("document root must be an object")
    _check_fields(doc, _TOP_LEVEL_FIELDS, "document", strict)

    graph_id = _as_str(_require(doc, "graph_id", "document"), "graph_id")

    raw_entries = _require(doc, "entry_points", "document")
    if not isinstance(raw_entries, dict):
        raise GraphLoadError("entry_points must be an object")
    _check_fields(raw_entries, set(ENTRY_POINT_NAMES), "entry_points", strict)
    entry_points = {}
    for name in ENTRY_POINT_NAMES:
        if name not in raw_entries:
            raise GraphLoadError(f"missing entry point '{name}'")
        entry_points[name] = _as_str(raw_entries[name], f"entry_points.{name}")

    variables = []
    seen_vars = set()
    for i, item in enumerate(doc.get("variables", [])):
        at = f"variables[{i}]"
        if not isinstance(item, dict):
            raise GraphLoadError(f"{at} must be an object")
        _check_fields(item, {"name", "type", "initial"}, at, strict)
        name = _as_str(_require(item, "name", at), f"{at}.name")
        if not _IDENT_RE.match(name):
            raise GraphLoadError(f"variable name '{name}' is not a valid identifier")
        if name in seen_vars:
            raise GraphLoadError(f"duplicate variable '{name}'")
        seen_vars.add(name)
        var_type = _as_str(_require(item, "type", at), f"{at}.type")
        if var_type not in VARIABLE_TYPES:
            raise GraphLoadError(f"{at}.type must be one of {', '.join(VARIABLE_TYPES)}")
        initial = _require(item, "initial", at)
        if var_type == "number":
            initial = _as_number(initial, f"{at}.initial")
        elif var_type == "text":
            initial = _as_str(initial, f"{at}.initial")
        elif not isinstance(initial, bool):
            raise GraphLoadError(f"{at}.initial must be a boolean")
        variables.append(VariableDecl(name, var_type, initial))

    modules = []
    seen_modules = set()
    for i, item in enumerate(doc.get("modules", [])):
        at = f"modules[{i}]"
        if not isinstance(item, dict):
            raise GraphLoadError(f"{at} must be an object")
        _check_fields(item, {"name", "entry", "description"}, at, strict)
        name = _as_str(_require(item, "name", at), f"{at}.name")
        if name in seen_modules:
            raise GraphLoadError(f"duplicate module '{name}'")
        seen_modules.add(name)
        modules.append(
            ModuleDef(
                name,
                _as_str(_require(item, "entry", at), f"{at}.entry"),
                _as_str(item.get("description", ""), f"{at}.description"),
            )
        )

    escalation = doc.get("escalation_module")
    if escalation is not None:
        escalation = _as_str(escalation, "escalation_module")

    personas = []
    for i, item in enumerate(doc.get("personas", [])):
        at = f"personas[{i}]"
        if not isinstance(item, dict):
            raise GraphLoadError(f"{at} must be an object")
        _check_fields(item, {"name", "avatars"}, at, strict)
        avatars = item.get("avatars", [])
        if not isinstance(avatars, list):
            raise GraphLoadError(f"{at}.avatars must be a list")
        personas.append(
            Persona(
                _as_str(_require(item, "name", at), f"{at}.name"),
                tuple(_as_str(a, f"{at}.avatars[{j}]") for j, a in enumerate(avatars)),
            )
        )

    raw_nodes = _require(doc, "nodes", "document")
    if not isinstance(raw_nodes, dict):
        raise GraphLoadError("nodes must be an object")
    nodes: dict[str, Node] = {}
    for node_id, obj in raw_nodes.items():
        if not node_id:
            raise GraphLoadError("empty node id")
        nodes[node_id] = _load_node(node_id, obj, strict)

    layout = doc.get("layout", {})
    if not isinstance(layout, dict):
        raise GraphLoadError("layout must be an object")

    return DialogGraph(
        graph_id=graph_id,
        nodes=nodes,
        entry_points=entry_points,
        modules=tuple(modules),
        escalation_module=escalation,
        variables=tuple(variables),
        personas=tuple(personas),
        layout=layout,
    )


# --- serialization ---


def _dump_number(value: Decimal):
    if value == value.to_integral_value():
        return int(value)
    return float(value)


def _dump_value(value: Value | VarRef):
    if isinstance(value, VarRef):
        return {"var": value.name}
    if isinstance(value, Decimal):
        return _dump_number(value)
    return value


def _dump_node(node: Node) -> dict:
    if isinstance(node, Statement):
        out: dict = {"kind": "statement", "text": list(node.text)}
        if node.media:
            out["media"] = [
                {"kind": m.kind, "uri": m.uri, "alt_text": m.alt_text} for m in node.media
            ]
        out["next"] = node.next
        return out
    if isinstance(node, Question):
        out = {"kind": "question", "prompt": list(node.prompt)}
        if node.quick_replies:
            out["quick_replies"] = [{"label": r.label, "next": r.next} for r in node.quick_replies]
        if node.store_as is not None:
            out["store_as"] = node.store_as
        if node.intent_routes:
            out["intent_routes"] = {name: target for name, target in node.intent_routes}
        out["fallback_next"] = node.fallback_next
        if node.reprompt_limit != DEFAULT_REPROMPT_LIMIT:
            out["reprompt_limit"] = node.reprompt_limit
        return out
    if isinstance(node, Condition):
        return {
            "kind": "condition",
            "branches": [{"expr": b.expr, "next": b.next} for b in node.branches],
            "else_next": node.else_next,
        }
    if isinstance(node, Assign):
        return {
            "kind": "assign",
            "assignments": [
                {"variable": a.variable, "value": _dump_value(a.value)} for a in node.assignments
            ],
            "next": node.next,
        }
    if isinstance(node, ModuleCall):
        return {"kind": "module_call", "module": node.module, "next": node.next}
    if isinstance(node, ModuleReturn):
        return {"kind": "module_return"}
    if isinstance(node, End):
        return {"kind": "end"}
    raise TypeError(f"unknown node type {node!r}")


def graph_to_document(graph: DialogGraph) -> dict:
    """Graph as a JSON-ready document dict."""
    doc: dict = {"graph_id": graph.graph_id}
    if graph.variables:
        doc["variables"] = [
            {"name": v.name, "type": v.type, "initial": _dump_value(v.initial)}
            for v in graph.variables
        ]
    doc["entry_points"] = dict(graph.entry_points)
    if graph.modules:
        doc["modules"] = [
            {"name": m.name, "entry": m.entry, "description": m.description}
            for m in graph.modules
        ]
    if graph.escalation_module is not None:
        doc["escalation_module"] = graph.escalation_module
    if graph.personas:
        doc["personas"] = [{"name": p.name, "avatars": list(p.avatars)} for p in graph.personas]
    doc["nodes"] = {node_id: _dump_node(node) for node_id, node in graph.nodes.items()}
    if graph.layout:
        doc["layout"] = graph.layout
    return doc


def serialize_graph(graph: DialogGraph) -> str:
    """Serialize so that load(serialize(g)) is value-equal to g."""
    return json.dumps(graph_to_document(graph), indent=2, ensure_ascii=False)
