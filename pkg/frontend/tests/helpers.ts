import { vi } from "vitest";
import type { GraphDocument, VersionMeta } from "../src/types";

export function meta(overrides: Partial<VersionMeta> = {}): VersionMeta {
  return {
    version_id: "g@v1",
    graph_id: "g",
    status: "draft",
    revision: 1,
    parent_version: null,
    created_at: "2026-01-01T00:00:00Z",
    ...overrides,
  };
}

/** Small but complete document the editing tests start from. */
export function baseDoc(): GraphDocument {
  return {
    graph_id: "g",
    entry_points: { onboarding: "hello", prompted: "hello", unprompted: "hello" },
    nodes: {
      hello: { kind: "statement", text: ["Hi there."], next: "pick" },
      pick: {
        kind: "question",
        prompt: ["Red or blue?"],
        quick_replies: [
          { label: "red", next: "done" },
          { label: "blue", next: "done" },
        ],
        fallback_next: "done",
      },
      done: { kind: "statement", text: ["Noted."], next: null },
    },
    modules: [],
    variables: [{ name: "mood", type: "text", initial: "" }],
    layout: {
      nodes: {
        hello: { x: 40, y: 40 },
        pick: { x: 40, y: 160 },
        done: { x: 40, y: 280 },
      },
    },
  };
}

/**
 * The fragment the snapshot test renders: a condition with two branches,
 * a question with options, and two module-call nodes.
 */
export function fragmentDoc(): GraphDocument {
  return {
    graph_id: "fragment",
    entry_points: { onboarding: "mood_check", prompted: "mood_check", unprompted: "mood_check" },
    nodes: {
      mood_check: {
        kind: "condition",
        branches: [
          { expr: "stress >= 4", next: "calm_down" },
          { expr: "stress >= 2", next: "note_good" },
        ],
        else_next: "ask_more",
      },
      ask_more: {
        kind: "question",
        prompt: ["Want to try an activity anyway?"],
        quick_replies: [
          { label: "sure", next: "note_good" },
          { label: "not today", next: null },
        ],
        fallback_next: null,
      },
      calm_down: { kind: "module_call", module: "breathing", next: null },
      note_good: { kind: "module_call", module: "positives", next: null },
    },
    modules: [
      { name: "breathing", entry: "calm_down" },
      { name: "positives", entry: "note_good" },
    ],
    variables: [{ name: "stress", type: "number", initial: 0 }],
    layout: {
      nodes: {
        mood_check: { x: 60, y: 60 },
        ask_more: { x: 60, y: 220 },
        calm_down: { x: 320, y: 60 },
        note_good: { x: 320, y: 180 },
      },
    },
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function errorResponse(status: number, code: string, message = code): Response {
  return jsonResponse({ error: { code, message } }, status);
}

export type FetchStub = ReturnType<typeof vi.fn<typeof fetch>>;

/** Install a fetch mock for the test; vitest restores it via unstubAllGlobals. */
export function stubFetch(impl: (url: string, init?: RequestInit) => Response | Promise<Response>): FetchStub {
  const stub = vi.fn<typeof fetch>(async (input: RequestInfo | URL, init?: RequestInit) => {
    return impl(String(input), init);
  });
  vi.stubGlobal("fetch", stub);
  return stub;
}

export function mount(): HTMLElement {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return root;
}

export function mouse(
  el: Element | Document,
  type: string,
  clientX = 0,
  clientY = 0,
): void {
  el.dispatchEvent(new MouseEvent(type, { clientX, clientY, bubbles: true }));
}
