import type { GraphDocument, NodeKind, NodeLayout, NodeSpec } from "./types";

// Pure document operations. Every mutation the UI performs goes through one
// of these so the editor can snapshot before/after uniformly.

const ID_PREFIX: Record<NodeKind, string> = {
  statement: "say",
  question: "ask",
  condition: "cond",
  assign: "set",
  module_call: "call",
  module_return: "ret",
  end: "end",
};

export function freshNodeId(doc: GraphDocument, kind: NodeKind): string {
  const prefix = ID_PREFIX[kind];
  let n = 1;
  while (`${prefix}_${n}` in doc.nodes) n += 1;
  return `${prefix}_${n}`;
}

function defaultSpec(kind: NodeKind): NodeSpec {
  switch (kind) {
    case "statement":
      return { kind, text: ["New message"], next: null };
    case "question":
      return { kind, prompt: ["New question"], quick_replies: [], fallback_next: null };
    case "condition":
      return { kind, branches: [], else_next: null };
    case "assign":
      return { kind, assignments: [], next: null };
    case "module_call":
      return { kind, module: "", next: null };
    case "module_return":
      return { kind };
    case "end":
      return { kind };
  }
}

export function addNode(doc: GraphDocument, kind: NodeKind, x: number, y: number): string {
  const id = freshNodeId(doc, kind);
  doc.nodes[id] = defaultSpec(kind);
  setPosition(doc, id, x, y);
  return id;
}

export function setPosition(doc: GraphDocument, id: string, x: number, y: number): void {
  if (!doc.layout) doc.layout = { nodes: {} };
  doc.layout.nodes[id] = { x: Math.round(x), y: Math.round(y) };
}

export function nodePosition(doc: GraphDocument, id: string): NodeLayout {
  return doc.layout?.nodes[id] ?? { x: 0, y: 0 };
}

/** Whether the node kind takes a '+' append control. */
export function canAppend(spec: NodeSpec): boolean {
  return spec.kind === "question" || spec.kind === "condition";
}

/**
 * The '+' action: a new empty option on a question, a new empty branch on a
 * condition. Anything else is a programming error upstream.
 */
export function appendChip(doc: GraphDocument, id: string): void {
  const spec = doc.nodes[id];
  if (spec.kind === "question") {
    if (!spec.quick_replies) spec.quick_replies = [];
    spec.quick_replies.push({ label: "", next: null });
  } else if (spec.kind === "condition") {
    if (!spec.branches) spec.branches = [];
    spec.branches.push({ expr: "", next: null });
  } else {
    throw new Error(`no '+' on ${spec.kind} nodes`);
  }
}

export function setNodeText(doc: GraphDocument, id: string, text: string): void {
  const spec = doc.nodes[id];
  if (spec.kind === "statement") spec.text = [text];
  else if (spec.kind === "question") spec.prompt = [text];
}

export function addVariable(
  doc: GraphDocument,
  name: string,
  type: "number" | "text" | "boolean",
  initial: unknown,
): void {
  doc.variables.push({ name, type, initial });
}

export interface Edge {
  from: string;
  to: string;
  label: string;
}

/** Flatten every outgoing reference of every node for edge rendering. */
export function edgesOf(doc: GraphDocument): Edge[] {
  const edges: Edge[] = [];
  const add = (from: string, to: string | null | undefined, label = "") => {
    if (to && to in doc.nodes) edges.push({ from, to, label });
  };
  for (const [id, spec] of Object.entries(doc.nodes)) {
    add(id, spec.next);
    for (const qr of spec.quick_replies ?? []) add(id, qr.next, qr.label);
    for (const br of spec.branches ?? []) add(id, br.next, br.expr);
    add(id, spec.else_next, "else");
    add(id, spec.fallback_next, "fallback");
    for (const [intent, target] of Object.entries(spec.intent_routes ?? {})) {
      add(id, target, intent);
    }
  }
  return edges;
}

/** Snapshot form used for history and dirty tracking. */
export function serializeDocument(doc: GraphDocument): string {
  return JSON.stringify(doc);
}

export function parseDocument(snapshot: string): GraphDocument {
  return JSON.parse(snapshot) as GraphDocument;
}
