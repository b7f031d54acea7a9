"""Dialog-graph runtime and serving stack for scripted coaching chatbots."""

from .conditions import (
    ExprParseError,
    MissingVariableError,
    eval_expr,
    expr_variables,
    format_expr,
    parse_expr,
    typecheck_expr,
)
from .engine import (
    CallStackLimit,
    DialogEngine,
    EngineFault,
    NonYieldingLoop,
    OutboundMessage,
    Session,
    SplitMix64,
)
from .graph import (
    Assign,
    Condition,
    DialogGraph,
    End,
    GraphLoadError,
    ModuleCall,
    ModuleReturn,
    Question,
    Statement,
    graph_to_document,
    load_graph,
    serialize_graph,
)
from .intents import IntentDef, RiskLexicon, detect_risk, match_intent, normalize
from .runtime import BotRuntime, TickFiring, TurnBusy
from .scheduler import CheckinConfig, due_users, parse_time_of_day, set_checkin
from .simulate import run_simulation
from .store import ContentStore, Conflict, NotFound, PublishBlocked, StoreError
from .validate import Diagnostic, has_errors, validate_graph

__version__ = "0.1.0"

__all__ = [
    "Assign",
    "BotRuntime",
    "CallStackLimit",
    "CheckinConfig",
    "Condition",
    "Conflict",
    "ContentStore",
    "DialogEngine",
    "DialogGraph",
    "Diagnostic",
    "End",
    "EngineFault",
    "ExprParseError",
    "GraphLoadError",
    "IntentDef",
    "MissingVariableError",
    "ModuleCall",
    "ModuleReturn",
    "NonYieldingLoop",
    "NotFound",
    "OutboundMessage",
    "PublishBlocked",
    "Question",
    "RiskLexicon",
    "Session",
    "SplitMix64",
    "Statement",
    "StoreError",
    "TickFiring",
    "TurnBusy",
    "detect_risk",
    "due_users",
    "eval_expr",
    "expr_variables",
    "format_expr",
    "graph_to_document",
    "has_errors",
    "load_graph",
    "match_intent",
    "normalize",
    "parse_expr",
    "parse_time_of_day",
    "run_simulation",
    "serialize_graph",
    "set_checkin",
    "typecheck_expr",
    "validate_graph",
    "__version__",
]
