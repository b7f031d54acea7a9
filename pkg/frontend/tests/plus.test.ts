import { afterEach, describe, expect, test, vi } from "vitest";
import { ApiClient } from "../src/api";
import { CanvasView } from "../src/canvas";
import { Editor } from "../src/editor";
import { appendChip, parseDocument, serializeDocument } from "../src/model";
import type { GraphDocument } from "../src/types";
import { baseDoc, jsonResponse, meta, mount, stubFetch } from "./helpers";

afterEach(() => {
  document.body.textContent = "";
  vi.unstubAllGlobals();
});

async function editorWithCanvas(doc: GraphDocument) {
  stubFetch(() => jsonResponse({ version: meta(), document: doc }));
  const api = new ApiClient("", "tok");
  const editor = new Editor(api, mount());
  const canvas = new CanvasView(mount(), {
    onMoveNode: () => {},
    onAppend: (id) => editor.edit((d) => appendChip(d, id)),
    onSelect: () => {},
    onDropNew: () => {},
  });
  editor.onChange = () => canvas.render(editor.doc!);
  await editor.open("g", "g@v1");
  return { editor, canvas };
}

describe("the '+' control", () => {
  test("question with 2 replies gains a third chip", async () => {
    const { canvas } = await editorWithCanvas(baseDoc());
    const question = canvas.world.querySelector('[data-node-id="pick"]')!;
    expect(question.querySelectorAll(".chip-option")).toHaveLength(2);

    (question.querySelector(".plus") as HTMLButtonElement).click();

    const after = canvas.world.querySelector('[data-node-id="pick"]')!;
    expect(after.querySelectorAll(".chip-option")).toHaveLength(3);
  });

  test("not rendered on statement nodes", async () => {
    const { canvas } = await editorWithCanvas(baseDoc());
    const statement = canvas.world.querySelector('[data-node-id="hello"]')!;
    expect(statement.querySelector(".plus")).toBeNull();
    expect(canvas.world.querySelector('[data-node-id="pick"] .plus')).not.toBeNull();
  });

  test("condition gains an empty branch chip", async () => {
    const doc = baseDoc();
    doc.nodes.route = { kind: "condition", branches: [], else_next: "done" };
    const { editor, canvas } = await editorWithCanvas(doc);
    const plus = canvas.world.querySelector('[data-node-id="route"] .plus') as HTMLButtonElement;
    plus.click();
    expect(editor.doc!.nodes.route.branches).toHaveLength(1);
    expect(editor.doc!.nodes.route.branches![0]).toEqual({ expr: "", next: null });
    const chip = canvas.world.querySelector('[data-node-id="route"] .chip-branch')!;
    expect(chip.textContent).toBe("…");
  });

  test("append marks the document dirty", async () => {
    const { editor } = await editorWithCanvas(baseDoc());
    expect(editor.dirty).toBe(false);
    editor.edit((d) => appendChip(d, "pick"));
    expect(editor.dirty).toBe(true);
  });

  test("appended chip survives save and reload", async () => {
    const store: { doc: GraphDocument; revision: number } = {
      doc: baseDoc(),
      revision: 1,
    };
    stubFetch((_url, init) => {
      if (init?.method === "PUT") {
        const body = JSON.parse(String(init.body));
        store.doc = body.document;
        store.revision = body.revision + 1;
        return jsonResponse({ version: meta({ revision: store.revision }) });
      }
      return jsonResponse({
        version: meta({ revision: store.revision }),
        document: store.doc,
      });
    });

    const api = new ApiClient("", "tok");
    const editor = new Editor(api, mount());
    await editor.open("g", "g@v1");
    editor.edit((d) => appendChip(d, "pick"));
    expect(await editor.save()).toBe(true);

    const fresh = new Editor(api, mount());
    await fresh.open("g", "g@v1");
    expect(fresh.doc!.nodes.pick.quick_replies).toHaveLength(3);
    expect(parseDocument(serializeDocument(fresh.doc!)).nodes.pick.quick_replies).toHaveLength(3);
  });

  test("appendChip refuses other kinds", () => {
    const doc = baseDoc();
    expect(() => appendChip(doc, "hello")).toThrow(/no '\+'/);
  });
});
