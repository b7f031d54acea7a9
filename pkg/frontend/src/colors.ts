import type { NodeKind } from "./types";

// Node fills, one per kind. These exact values are load-bearing: the
// snapshot test reads them back off the rendered style attribute.
export const KIND_COLORS: Record<NodeKind, string> = {
  condition: "#f06292", // pink
  question: "#66bb6a", // green
  module_call: "#cddc39", // lime
  statement: "#6a5acd", // slate blue
  assign: "#ffc107", // amber
  end: "#424242", // dark gray
  module_return: "#90a4ae",
};

// Branch and option chips share one beige.
export const CHIP_COLOR = "#f5f5dc";

// Kinds with a light fill get dark text.
export const KIND_TEXT: Record<NodeKind, string> = {
  condition: "#fff",
  question: "#fff",
  module_call: "#333",
  statement: "#fff",
  assign: "#333",
  end: "#fff",
  module_return: "#333",
};

export const PALETTE_ORDER: NodeKind[] = [
  "statement",
  "question",
  "condition",
  "assign",
  "module_call",
  "module_return",
  "end",
];

export const KIND_LABELS: Record<NodeKind, string> = {
  statement: "Statement",
  question: "Question",
  condition: "Condition",
  assign: "Assign",
  module_call: "Module call",
  module_return: "Module return",
  end: "End",
};
