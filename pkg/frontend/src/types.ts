// Wire types mirroring the server's JSON shapes. Keep index signatures so
// fields we do not model survive a load/save round trip untouched.

export type NodeKind =
  | "statement"
  | "question"
  | "condition"
  | "assign"
  | "module_call"
  | "module_return"
  | "end";

export interface QuickReply {
  label: string;
  next: string | null;
  [extra: string]: unknown;
}

export interface Branch {
  expr: string;
  next: string | null;
  [extra: string]: unknown;
}

export interface Assignment {
  variable: string;
  value: unknown;
  [extra: string]: unknown;
}

export interface NodeSpec {
  kind: NodeKind;
  text?: string[];
  prompt?: string[];
  quick_replies?: QuickReply[];
  branches?: Branch[];
  else_next?: string | null;
  assignments?: Assignment[];
  module?: string;
  store_as?: string;
  fallback_next?: string | null;
  intent_routes?: Record<string, string>;
  next?: string | null;
  [extra: string]: unknown;
}

export interface ModuleDef {
  name: string;
  entry: string;
  description?: string;
  [extra: string]: unknown;
}

export interface VariableDecl {
  name: string;
  type: "number" | "text" | "boolean";
  initial: unknown;
  [extra: string]: unknown;
}

export interface NodeLayout {
  x: number;
  y: number;
}

export interface GraphDocument {
  graph_id: string;
  entry_points: Record<string, string>;
  nodes: Record<string, NodeSpec>;
  modules: ModuleDef[];
  variables: VariableDecl[];
  layout?: { nodes: Record<string, NodeLayout>; [extra: string]: unknown };
  [extra: string]: unknown;
}

export interface VersionMeta {
  version_id: string;
  graph_id: string;
  status: "draft" | "published";
  revision: number;
  parent_version: string | null;
  created_at: string;
}

export interface Diagnostic {
  severity: "error" | "warning";
  code: string;
  node: string | null;
  message: string;
}

export interface ValidationReport {
  diagnostics: Diagnostic[];
  errors: number;
  warnings: number;
}

export interface OutboundMessage {
  kind: string;
  body: string;
  alt_text: string;
  quick_replies: string[];
}
