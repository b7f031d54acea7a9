"""Static validation of dialog graphs.

Each check carries a stable code.  Errors block publishing; warnings do
not.  The diagnostic list is deterministically ordered (code, then node
id), and validation is a pure function of the graph.

Checks:
  E-DANGLE   a next/branch/route/entry/module reference does not resolve
  E-RETURN   a module-return is reachable from a top-level entry point
             with no intervening module call (stack would underflow)
  E-NOEXIT   part of a module can reach neither a module-return nor an
             end, so a call into it could never come back
  E-LIVELOCK a directed cycle contains no question node, so a turn
             through it could never yield
  E-EXPR     a condition expression fails to parse or typecheck
  E-ASSIGN   an assignment's value cannot soundly land in its target
  E-BUILTIN  an author writes to an engine-maintained variable
  W-UNREACH  a node is unreachable from every entry point and module
  W-READBEFOREWRITE  a variable may be read before anything wrote it
"""

from __future__ import annotations

from dataclasses import dataclass

from .conditions import ExprParseError, expr_variables, parse_expr, typecheck_expr
from .graph import (
    Assign,
    Condition,
    DialogGraph,
    End,
    ModuleCall,
    ModuleReturn,
    Node,
    Question,
    Statement,
    VarRef,
)

__all__ = [
    "Diagnostic",
    "validate_graph",
    "reachable_set",
    "has_errors",
    "BUILTIN_TYPES",
    "ASSIGNABLE_BUILTINS",
]

# Engine-maintained variables injected into every store.  Authors may
# clear the escalation flag with an assign; day and origin are strictly
# read-only.
BUILTIN_TYPES = {
    "day": "number",
    "origin": "text",
    "escalated_last_engagement": "boolean",
}
ASSIGNABLE_BUILTINS = {"escalated_last_engagement"}


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    code: str
    node: str | None
    message: str


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)


def _node_targets(node: Node) -> list[str]:
    """Successor node ids named directly on the node (module name excluded)."""
    if isinstance(node, Statement):
        return [node.next] if node.next is not None else []
    if isinstance(node, Question):
        targets = [reply.next for reply in node.quick_replies]
        targets.extend(target for _, target in node.intent_routes)
        targets.append(node.fallback_next)
        return targets
    if isinstance(node, Condition):
        return [branch.next for branch in node.branches] + [node.else_next]
    if isinstance(node, Assign):
        return [node.next]
    if isinstance(node, ModuleCall):
        return [node.next]
    return []


def _successors(graph: DialogGraph, node: Node, *, into_modules: bool) -> list[str]:
    """All-edge successors; a module call contributes its continuation and,
    when ``into_modules``, the called module's entry."""
    targets = [t for t in _node_targets(node) if t in graph.nodes]
    if into_modules and isinstance(node, ModuleCall):
        mod = graph.module_named(node.module)
        if mod is not None and mod.entry in graph.nodes:
            targets.append(mod.entry)
    return targets


def reachable_set(graph: DialogGraph, start: str) -> set[str]:
    """Forward reachability over all edge kinds from ``start``.

    A module call contributes both the called module's entry and its own
    continuation.  Linear in edges.
    """
    if start not in graph.nodes:
        raise ValueError(f"unknown node id '{start}'")
    seen = {start}
    frontier = [start]
    while frontier:
        node_id = frontier.pop()
        for target in _successors(graph, graph.nodes[node_id], into_modules=True):
            if target not in seen:
                seen.add(target)
                frontier.append(target)
    return seen


def _check_dangling(graph: DialogGraph, out: list[Diagnostic]) -> None:
    def err(node: str | None, message: str) -> None:
        out.append(Diagnostic("error", "E-DANGLE", node, message))

    for name, target in graph.entry_points.items():
        if target not in graph.nodes:
            err(None, f"entry point '{name}' targets unknown node '{target}'")
    module_names = set()
    for mod in graph.modules:
        module_names.add(mod.name)
        if mod.entry not in graph.nodes:
            err(None, f"module '{mod.name}' entry targets unknown node '{mod.entry}'")
    if graph.escalation_module is not None and graph.escalation_module not in module_names:
        err(None, f"escalation module '{graph.escalation_module}' is not defined")

    for node_id, node in graph.nodes.items():
        for target in _node_targets(node):
            if target not in graph.nodes:
                err(node_id, f"edge targets unknown node '{target}'")
        if isinstance(node, ModuleCall) and node.module not in module_names:
            err(node_id, f"call targets unknown module '{node.module}'")


def _check_expressions(graph: DialogGraph, out: list[Diagnostic]) -> None:
    declared = dict(BUILTIN_TYPES)
    declared.update(graph.declared_types())
    for node_id, node in graph.nodes.items():
        if not isinstance(node, Condition):
            continue
        for i, branch in enumerate(node.branches):
            try:
                expr = parse_expr(branch.expr)
            except ExprParseError as exc:
                out.append(
                    Diagnostic("error", "E-EXPR", node_id, f"branch {i}: {exc}")
                )
                continue
            for problem in typecheck_expr(expr, declared):
                out.append(
                    Diagnostic("error", "E-EXPR", node_id, f"branch {i}: {problem}")
                )


def _check_assignments(graph: DialogGraph, out: list[Diagnostic]) -> None:
    declared = graph.declared_types()
    for decl in graph.variables:
        if decl.name in BUILTIN_TYPES:
            out.append(
                Diagnostic(
                    "error",
                    "E-BUILTIN",
                    None,
                    f"variable declaration shadows built-in '{decl.name}'",
                )
            )
    for node_id, node in graph.nodes.items():
        if isinstance(node, Question) and node.store_as in BUILTIN_TYPES:
            out.append(
                Diagnostic(
                    "error",
                    "E-BUILTIN",
                    node_id,
                    f"store_as targets built-in variable '{node.store_as}'",
                )
            )
        if not isinstance(node, Assign):
            continue
        for assignment in node.assignments:
            target = assignment.variable
            if target in BUILTIN_TYPES and target not in ASSIGNABLE_BUILTINS:
                out.append(
                    Diagnostic(
                        "error",
                        "E-BUILTIN",
                        node_id,
                        f"assignment targets built-in variable '{target}'",
                    )
                )
                continue
            target_type = BUILTIN_TYPES.get(target) or declared.get(target)
            if target_type is None:
                out.append(
                    Diagnostic(
                        "error",
                        "E-ASSIGN",
                        node_id,
                        f"assignment to undeclared variable '{target}'",
                    )
                )
                continue
            value = assignment.value
            if isinstance(value, VarRef):
                source_type = declared.get(value.name) or BUILTIN_TYPES.get(value.name)
                if source_type is None:
                    out.append(
                        Diagnostic(
                            "error",
                            "E-ASSIGN",
                            node_id,
                            f"assignment reads undeclared variable '{value.name}'",
                        )
                    )
                elif source_type != target_type:
                    out.append(
                        Diagnostic(
                            "error",
                            "E-ASSIGN",
                            node_id,
                            f"cannot assign {source_type} '{value.name}' to {target_type} '{target}'",
                        )
                    )
            else:
                value_type = (
                    "boolean"
                    if isinstance(value, bool)
                    else "text" if isinstance(value, str) else "number"
                )
                if value_type != target_type:
                    out.append(
                        Diagnostic(
                            "error",
                            "E-ASSIGN",
                            node_id,
                            f"cannot assign {value_type} literal to {target_type} '{target}'",
                        )
                    )


def _roots(graph: DialogGraph) -> list[str]:
    roots = [t for t in graph.entry_points.values() if t in graph.nodes]
    roots.extend(m.entry for m in graph.modules if m.entry in graph.nodes)
    return roots


def _check_unreachable(graph: DialogGraph, out: list[Diagnostic]) -> None:
    seen: set[str] = set()
    frontier = list(dict.fromkeys(_roots(graph)))
    seen.update(frontier)
    while frontier:
        node_id = frontier.pop()
        for target in _successors(graph, graph.nodes[node_id], into_modules=True):
            if target not in seen:
                seen.add(target)
                frontier.append(target)
    for node_id in graph.nodes:
        if node_id not in seen:
            out.append(
                Diagnostic(
                    "warning",
                    "W-UNREACH",
                    node_id,
                    "unreachable from every entry point and module entry",
                )
            )


def _check_module_returns(graph: DialogGraph, out: list[Diagnostic]) -> None:
    # Track whether a node is reachable with an empty call stack.  A
    # module call's continuation keeps the caller's stack state; its
    # module entry always runs with a non-empty stack.
    seen: set[tuple[str, bool]] = set()
    frontier: list[tuple[str, bool]] = []
    for target in graph.entry_points.values():
        if target in graph.nodes and (target, True) not in seen:
            seen.add((target, True))
            frontier.append((target, True))
    flagged: set[str] = set()
    while frontier:
        node_id, stack_empty = frontier.pop()
        node = graph.nodes[node_id]
        if isinstance(node, ModuleReturn):
            if stack_empty:
                flagged.add(node_id)
            continue
        states: list[tuple[str, bool]] = [
            (t, stack_empty) for t in _node_targets(node) if t in graph.nodes
        ]
        if isinstance(node, ModuleCall):
            mod = graph.module_named(node.module)
            if mod is not None and mod.entry in graph.nodes:
                states.append((mod.entry, False))
        for state in states:
            if state not in seen:
                seen.add(state)
                frontier.append(state)
    for node_id in sorted(flagged):
        out.append(
            Diagnostic(
                "error",
                "E-RETURN",
                node_id,
                "module return reachable from a top-level entry point without a module call",
            )
        )


def _is_exit(node: Node) -> bool:
    if isinstance(node, (ModuleReturn, End)):
        return True
    return isinstance(node, Statement) and node.next is None


def _check_module_exits(graph: DialogGraph, out: list[Diagnostic]) -> None:
    # Within a module, a nested call is assumed to return: the call edge
    # goes to the continuation only.  Modules that themselves cannot
    # return are flagged on their own entry.
    for mod in graph.modules:
        if mod.entry not in graph.nodes:
            continue
        reach = {mod.entry}
        frontier = [mod.entry]
        while frontier:
            node_id = frontier.pop()
            for target in _successors(graph, graph.nodes[node_id], into_modules=False):
                if target not in reach:
                    reach.add(target)
                    frontier.append(target)

        exits = {n for n in reach if _is_exit(graph.nodes[n])}
        can_exit = set(exits)
        # backward closure within the module's reachable subgraph
        incoming: dict[str, list[str]] = {n: [] for n in reach}
        for n in reach:
            for target in _successors(graph, graph.nodes[n], into_modules=False):
                if target in reach:
                    incoming[target].append(n)
        frontier = list(exits)
        while frontier:
            node_id = frontier.pop()
            for pred in incoming[node_id]:
                if pred not in can_exit:
                    can_exit.add(pred)
                    frontier.append(pred)

        trapped = sorted(reach - can_exit)
        if trapped:
            shown = ", ".join(trapped[:5]) + ("…" if len(trapped) > 5 else "")
            out.append(
                Diagnostic(
                    "error",
                    "E-NOEXIT",
                    mod.entry,
                    f"module '{mod.name}' can get stuck with no return or end: {shown}",
                )
            )


def _check_livelock(graph: DialogGraph, out: list[Diagnostic]) -> None:
    # Any cycle in the question-free subgraph is a cycle no turn could
    # ever yield from.  Iterative Tarjan SCC; self-loops count.
    nodes = [n for n, node in graph.nodes.items() if not isinstance(node, Question)]
    node_set = set(nodes)
    succ = {
        n: [t for t in _successors(graph, graph.nodes[n], into_modules=True) if t in node_set]
        for n in nodes
    }
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = 0
    sccs: list[list[str]] = []

    for root in nodes:
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            node_id, child_i = work[-1]
            if child_i == 0:
                index[node_id] = low[node_id] = counter
                counter += 1
                stack.append(node_id)
                on_stack.add(node_id)
            advanced = False
            children = succ[node_id]
            while child_i < len(children):
                child = children[child_i]
                child_i += 1
                if child not in index:
                    work[-1] = (node_id, child_i)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node_id] = min(low[node_id], index[child])
            if advanced:
                continue
            work.pop()
            if low[node_id] == index[node_id]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node_id:
                        break
                sccs.append(component)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node_id])

    for component in sccs:
        cyclic = len(component) > 1 or component[0] in succ[component[0]]
        if cyclic:
            members = sorted(component)
            out.append(
                Diagnostic(
                    "error",
                    "E-LIVELOCK",
                    members[0],
                    "cycle with no question node: " + ", ".join(members),
                )
            )


def _question_gen(node: Question, target: str) -> set[str]:
    # store_as is written when a reply or routed intent advances the
    # question, not on the reprompt-exhausted fallback edge.  An open
    # question (no replies, no routes) stores on its only exit.  When a
    # reply edge and the fallback edge share a target the write is not
    # guaranteed there, so it does not count.
    if node.store_as is None:
        return set()
    if not node.quick_replies and not node.intent_routes:
        return {node.store_as}
    reply_targets = {r.next for r in node.quick_replies}
    reply_targets.update(t for _, t in node.intent_routes)
    if target in reply_targets and target != node.fallback_next:
        return {node.store_as}
    return set()


def _check_read_before_write(graph: DialogGraph, out: list[Diagnostic]) -> None:
    # Forward must-write dataflow: a variable is safely readable at a
    # node only if every path from every root wrote it.  Module bodies
    # start from nothing-written (callers are not credited), and a call's
    # continuation is not credited with the module's writes; both
    # directions over-approximate, per the check's contract.
    declared = {d.name for d in graph.variables}
    must_in: dict[str, set[str] | None] = {}
    seeds = list(dict.fromkeys(_roots(graph)))
    for seed in seeds:
        must_in[seed] = set()
    frontier = list(seeds)
    while frontier:
        node_id = frontier.pop()
        node = graph.nodes[node_id]
        base = must_in[node_id]
        assert base is not None
        if isinstance(node, Assign):
            out_set = base | {a.variable for a in node.assignments}
        else:
            out_set = base
        for target in _successors(graph, node, into_modules=False):
            flowing = out_set
            if isinstance(node, Question):
                flowing = out_set | _question_gen(node, target)
            current = must_in.get(target)
            updated = flowing if current is None else current & flowing
            if current is None or updated != current:
                must_in[target] = set(updated)
                frontier.append(target)

    def warn(node_id: str, name: str, seen: set[tuple[str, str]]) -> None:
        if (node_id, name) in seen:
            return
        seen.add((node_id, name))
        out.append(
            Diagnostic(
                "warning",
                "W-READBEFOREWRITE",
                node_id,
                f"variable '{name}' may be read before any path writes it",
            )
        )

    emitted: set[tuple[str, str]] = set()
    for node_id, node in graph.nodes.items():
        written = must_in.get(node_id)
        if written is None:
            continue  # unreachable; W-UNREACH covers it
        if isinstance(node, Condition):
            for branch in node.branches:
                try:
                    expr = parse_expr(branch.expr)
                except ExprParseError:
                    continue
                for name in sorted(expr_variables(expr)):
                    if name in declared and name not in written and name not in BUILTIN_TYPES:
                        warn(node_id, name, emitted)
        elif isinstance(node, Assign):
            written_here = set(written)
            for assignment in node.assignments:
                value = assignment.value
                if isinstance(value, VarRef):
                    name = value.name
                    if name in declared and name not in written_here and name not in BUILTIN_TYPES:
                        warn(node_id, name, emitted)
                written_here.add(assignment.variable)


def validate_graph(graph: DialogGraph) -> list[Diagnostic]:
    """Run every check; result is cached on the (immutable) graph."""
    cached = getattr(graph, "_diagnostics", None)
    if cached is not None:
        return list(cached)
    out: list[Diagnostic] = []
    _check_dangling(graph, out)
    _check_expressions(graph, out)
    _check_assignments(graph, out)
    _check_module_returns(graph, out)
    _check_module_exits(graph, out)
    _check_livelock(graph, out)
    _check_unreachable(graph, out)
    _check_read_before_write(graph, out)
    out.sort(key=lambda d: (d.code, d.node or "", d.message))
    graph._diagnostics = tuple(out)  # type: ignore[attr-defined]
    return out
