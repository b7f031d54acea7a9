import { ApiClient } from "./api";
import { CanvasView } from "./canvas";
import { ChatPanel } from "./chat";
import { Editor } from "./editor";
import { addNode, appendChip, setPosition } from "./model";
import { Palette } from "./palette";
import { ValidationPanel } from "./validation";
import { VariablesPanel } from "./variables";
import "./styles.css";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

const api = new ApiClient("", localStorage.getItem("adminToken") ?? "");

const tokenInput = el<HTMLInputElement>("admin-token");
tokenInput.value = api.adminToken;
tokenInput.addEventListener("change", () => {
  api.adminToken = tokenInput.value.trim();
  localStorage.setItem("adminToken", api.adminToken);
  void refreshGraphList();
});

const editor = new Editor(api, el("banners"));

const canvas = new CanvasView(el("canvas"), {
  onMoveNode: (id, x, y) => editor.edit((doc) => setPosition(doc, id, x, y)),
  onAppend: (id) => editor.edit((doc) => appendChip(doc, id)),
  onSelect: () => {},
  onDropNew: (kind, x, y) => editor.edit((doc) => addNode(doc, kind, x, y)),
});

new Palette(el("palette"), (kind, viaClick) => {
  if (viaClick) {
    const x = (400 - canvas.panX) / canvas.scale;
    const y = (280 - canvas.panY) / canvas.scale;
    editor.edit((doc) => addNode(doc, kind, x, y));
  } else {
    canvas.armDrop(kind);
  }
});

const validation = new ValidationPanel(el("validation"), {
  run: async () => {
    if (editor.dirty) await editor.save();
    return api.validate(editor.graphId, editor.versionRef);
  },
  publish: async () => {
    await api.publish(editor.graphId, editor.versionRef);
    await editor.reload();
    setStatus(`published ${editor.versionRef}`);
  },
  focusNode: (id) => canvas.focusNode(id),
});

const variables = new VariablesPanel(el("variables"), editor);

const chat = new ChatPanel(el("chat"), api, {
  botId: localStorage.getItem("chatBot") ?? "demo",
  channelToken: localStorage.getItem("chatToken") ?? "",
  userId: "canvas-tester",
});
const chatBotInput = el<HTMLInputElement>("chat-bot");
const chatTokenInput = el<HTMLInputElement>("chat-token");
chatBotInput.value = chat.target.botId;
chatTokenInput.value = chat.target.channelToken;
chatBotInput.addEventListener("change", () => {
  chat.target.botId = chatBotInput.value.trim();
  localStorage.setItem("chatBot", chat.target.botId);
});
chatTokenInput.addEventListener("change", () => {
  chat.target.channelToken = chatTokenInput.value.trim();
  localStorage.setItem("chatToken", chat.target.channelToken);
});

const versionSelect = el<HTMLSelectElement>("version-select");
const statusEl = el("status");

function setStatus(text: string): void {
  statusEl.textContent = text;
}

editor.onChange = () => {
  if (editor.doc) canvas.render(editor.doc);
  variables.render();
  el<HTMLButtonElement>("btn-undo").disabled = !editor.history.canUndo();
  el<HTMLButtonElement>("btn-redo").disabled = !editor.history.canRedo();
  const meta = editor.meta;
  setStatus(
    meta
      ? `${meta.version_id} (${meta.status}, rev ${meta.revision})` +
          (editor.dirty ? " *" : "")
      : "no draft open",
  );
};

async function refreshGraphList(): Promise<void> {
  const { graphs } = await api.listGraphs();
  versionSelect.textContent = "";
  for (const graph of graphs) {
    for (const version of graph.versions) {
      const opt = document.createElement("option");
      opt.value = `${graph.graph_id}|${version.version_id}`;
      opt.textContent = `${version.version_id} (${version.status})`;
      versionSelect.appendChild(opt);
    }
  }
  const first = graphs.flatMap((g) => g.versions).find((v) => v.status === "draft");
  if (first) {
    versionSelect.value = `${first.graph_id}|${first.version_id}`;
    await editor.open(first.graph_id, first.version_id);
    validation.invalidate();
  }
}

versionSelect.addEventListener("change", async () => {
  const [graphId, versionId] = versionSelect.value.split("|");
  await editor.open(graphId, versionId);
  validation.invalidate();
});

el("btn-save").addEventListener("click", async () => {
  if (await editor.save()) validation.invalidate();
});
el("btn-undo").addEventListener("click", () => editor.undo());
el("btn-redo").addEventListener("click", () => editor.redo());
el("btn-validate").addEventListener("click", () => void validation.refresh());
el("btn-duplicate").addEventListener("click", async () => {
  const meta = await api.duplicate(editor.graphId, editor.versionRef);
  await refreshGraphList();
  versionSelect.value = `${meta.graph_id}|${meta.version_id}`;
  await editor.open(meta.graph_id, meta.version_id);
});

window.addEventListener("keydown", (e) => {
  if ((e.ctrlKey || e.metaKey) && e.key === "z" && !e.shiftKey) {
    e.preventDefault();
    editor.undo();
  } else if ((e.ctrlKey || e.metaKey) && (e.key === "y" || (e.key === "z" && e.shiftKey))) {
    e.preventDefault();
    editor.redo();
  } else if ((e.ctrlKey || e.metaKey) && e.key === "s") {
    e.preventDefault();
    void el("btn-save").click();
  }
});

if (api.adminToken) {
  refreshGraphList().catch((err) => setStatus(`load failed: ${err.message}`));
} else {
  setStatus("enter the admin token to begin");
}
