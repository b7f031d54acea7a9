import type { Editor } from "./editor";
import { addVariable } from "./model";
import type { VariableDecl } from "./types";

// Declared variables, made explicit instead of living implicitly in
// store_as/assign fields scattered over the graph. Adding one is an
// undoable edit like everything else.

export class VariablesPanel {
  private listEl: HTMLElement;
  private nameInput: HTMLInputElement;
  private typeSelect: HTMLSelectElement;
  private initialInput: HTMLInputElement;

  constructor(
    root: HTMLElement,
    private editor: Editor,
  ) {
    root.classList.add("variables-panel");
    const header = document.createElement("div");
    header.className = "panel-header";
    header.textContent = "Variables";
    root.appendChild(header);

    this.listEl = document.createElement("ul");
    this.listEl.className = "variable-list";
    root.appendChild(this.listEl);

    const form = document.createElement("div");
    form.className = "variable-form";
    this.nameInput = document.createElement("input");
    this.nameInput.placeholder = "name";
    this.typeSelect = document.createElement("select");
    for (const t of ["text", "number", "boolean"]) {
      const opt = document.createElement("option");
      opt.value = t;
      opt.textContent = t;
      this.typeSelect.appendChild(opt);
    }
    this.initialInput = document.createElement("input");
    this.initialInput.placeholder = "initial";
    const addBtn = document.createElement("button");
    addBtn.type = "button";
    addBtn.textContent = "Add";
    addBtn.addEventListener("click", () => this.add());
    form.append(this.nameInput, this.typeSelect, this.initialInput, addBtn);
    root.appendChild(form);
  }

  render(): void {
    this.listEl.textContent = "";
    for (const decl of this.editor.doc?.variables ?? []) {
      const li = document.createElement("li");
      li.className = "variable-row";
      li.textContent = `${decl.name}: ${decl.type} = ${JSON.stringify(decl.initial)}`;
      this.listEl.appendChild(li);
    }
  }

  private add(): void {
    const name = this.nameInput.value.trim();
    if (!name) return;
    const type = this.typeSelect.value as VariableDecl["type"];
    const raw = this.initialInput.value;
    let initial: unknown = raw;
    if (type === "number") initial = Number(raw) || 0;
    if (type === "boolean") initial = raw === "true";
    this.editor.edit((doc) => addVariable(doc, name, type, initial));
    this.nameInput.value = "";
    this.initialInput.value = "";
  }
}
