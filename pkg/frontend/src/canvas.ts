import { CHIP_COLOR, KIND_COLORS, KIND_LABELS, KIND_TEXT } from "./colors";
import { canAppend, edgesOf, nodePosition } from "./model";
import type { GraphDocument, NodeKind, NodeSpec } from "./types";

export const NODE_W = 168;
export const NODE_H = 52;

// jsdom reports zero-sized elements; fall back to a nominal viewport so the
// centering math stays deterministic under test.
const FALLBACK_W = 800;
const FALLBACK_H = 600;

export interface CanvasCallbacks {
  onMoveNode(id: string, x: number, y: number): void;
  onAppend(id: string): void;
  onSelect(id: string | null): void;
  onDropNew(kind: NodeKind, x: number, y: number): void;
}

interface DragState {
  id: string;
  el: HTMLElement;
  startX: number;
  startY: number;
  origX: number;
  origY: number;
  moved: boolean;
}

export class CanvasView {
  world: HTMLElement;
  svg: SVGSVGElement;
  scale = 1;
  panX = 0;
  panY = 0;
  focused: string | null = null;

  private doc: GraphDocument | null = null;
  private drag: DragState | null = null;
  private pan: { startX: number; startY: number; origX: number; origY: number } | null = null;
  private armedKind: NodeKind | null = null;

  constructor(
    public root: HTMLElement,
    private callbacks: CanvasCallbacks,
  ) {
    root.classList.add("canvas-root");
    this.svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    this.svg.setAttribute("class", "edge-layer");
    this.world = document.createElement("div");
    this.world.className = "canvas-world";
    this.world.appendChild(this.svg);
    root.appendChild(this.world);
    this.applyTransform();

    root.addEventListener("mousedown", (e) => this.onMouseDown(e));
    root.addEventListener("mousemove", (e) => this.onMouseMove(e));
    root.addEventListener("mouseup", (e) => this.onMouseUp(e));
    root.addEventListener("wheel", (e) => this.onWheel(e));
  }

  render(doc: GraphDocument): void {
    this.doc = doc;
    for (const el of Array.from(this.world.querySelectorAll(".canvas-node"))) el.remove();
    for (const [id, spec] of Object.entries(doc.nodes)) {
      this.world.appendChild(this.buildNode(id, spec, doc));
    }
    this.renderEdges(doc);
    if (this.focused && !(this.focused in doc.nodes)) this.focused = null;
    this.markFocus();
  }

  private buildNode(id: string, spec: NodeSpec, doc: GraphDocument): HTMLElement {
    const pos = nodePosition(doc, id);
    const el = document.createElement("div");
    el.className = `canvas-node node-${spec.kind}`;
    el.dataset.nodeId = id;
    el.setAttribute(
      "style",
      `left:${pos.x}px;top:${pos.y}px;width:${NODE_W}px;` +
        `background:${KIND_COLORS[spec.kind]};color:${KIND_TEXT[spec.kind]}`,
    );

    const head = document.createElement("div");
    head.className = "node-head";
    const kindTag = document.createElement("span");
    kindTag.className = "node-kind";
    kindTag.textContent = KIND_LABELS[spec.kind];
    const idTag = document.createElement("span");
    idTag.className = "node-id";
    idTag.textContent = id;
    head.append(kindTag, idTag);
    el.appendChild(head);

    const body = document.createElement("div");
    body.className = "node-body";
    body.textContent = this.preview(spec);
    el.appendChild(body);

    const chips = this.buildChips(spec);
    if (chips) el.appendChild(chips);

    if (canAppend(spec)) {
      const plus = document.createElement("button");
      plus.type = "button";
      plus.className = "plus";
      plus.textContent = "+";
      plus.title = spec.kind === "question" ? "Add option" : "Add branch";
      plus.addEventListener("mousedown", (e) => e.stopPropagation());
      plus.addEventListener("click", (e) => {
        e.stopPropagation();
        this.callbacks.onAppend(id);
      });
      el.appendChild(plus);
    }
    return el;
  }

  private preview(spec: NodeSpec): string {
    switch (spec.kind) {
      case "statement":
        return spec.text?.[0] ?? "";
      case "question":
        return spec.prompt?.[0] ?? "";
      case "condition":
        return spec.else_next ? `else -> ${spec.else_next}` : "";
      case "assign":
        return (spec.assignments ?? [])
          .map((a) => `${a.variable} = ${JSON.stringify(a.value)}`)
          .join(", ");
      case "module_call":
        return spec.module || "(unset)";
      default:
        return "";
    }
  }

  private buildChips(spec: NodeSpec): HTMLElement | null {
    let items: { cls: string; text: string }[] = [];
    if (spec.kind === "question") {
      items = (spec.quick_replies ?? []).map((qr) => ({
        cls: "chip chip-option",
        text: qr.label || "…",
      }));
    } else if (spec.kind === "condition") {
      items = (spec.branches ?? []).map((br) => ({
        cls: "chip chip-branch",
        text: br.expr || "…",
      }));
    }
    if (!items.length) return null;
    const row = document.createElement("div");
    row.className = "chip-row";
    for (const item of items) {
      const chip = document.createElement("span");
      chip.className = item.cls;
      chip.setAttribute("style", `background:${CHIP_COLOR}`);
      chip.textContent = item.text;
      row.appendChild(chip);
    }
    return row;
  }

  private renderEdges(doc: GraphDocument): void {
    while (this.svg.firstChild) this.svg.removeChild(this.svg.firstChild);
    for (const edge of edgesOf(doc)) {
      const a = nodePosition(doc, edge.from);
      const b = nodePosition(doc, edge.to);
      const x1 = a.x + NODE_W;
      const y1 = a.y + NODE_H / 2;
      const x2 = b.x;
      const y2 = b.y + NODE_H / 2;
      const midX = Math.round((x1 + x2) / 2);
      const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
      line.setAttribute("class", "edge");
      line.setAttribute("points", `${x1},${y1} ${midX},${y1} ${midX},${y2} ${x2},${y2}`);
      line.setAttribute("fill", "none");
      this.svg.appendChild(line);
    }
  }

  // --- viewport ---

  private viewSize(): { w: number; h: number } {
    return {
      w: this.root.clientWidth || FALLBACK_W,
      h: this.root.clientHeight || FALLBACK_H,
    };
  }

  private applyTransform(): void {
    this.world.style.transform =
      `translate(${this.panX}px, ${this.panY}px) scale(${this.scale})`;
  }

  /** Center the given node in the viewport and outline it. */
  focusNode(id: string): void {
    if (!this.doc || !(id in this.doc.nodes)) return;
    const pos = nodePosition(this.doc, id);
    const { w, h } = this.viewSize();
    this.panX = Math.round(w / 2 - (pos.x + NODE_W / 2) * this.scale);
    this.panY = Math.round(h / 2 - (pos.y + NODE_H / 2) * this.scale);
    this.applyTransform();
    this.focused = id;
    this.markFocus();
  }

  private markFocus(): void {
    for (const el of Array.from(this.world.querySelectorAll(".canvas-node"))) {
      el.classList.toggle("focused", (el as HTMLElement).dataset.nodeId === this.focused);
    }
  }

  /** Palette hands us a kind; next canvas mouseup places it. */
  armDrop(kind: NodeKind): void {
    this.armedKind = kind;
  }

  screenToWorld(clientX: number, clientY: number): { x: number; y: number } {
    const rect = this.root.getBoundingClientRect();
    return {
      x: (clientX - rect.left - this.panX) / this.scale,
      y: (clientY - rect.top - this.panY) / this.scale,
    };
  }

  // --- mouse handling ---

  private onMouseDown(e: MouseEvent): void {
    const nodeEl = (e.target as Element).closest?.(".canvas-node") as HTMLElement | null;
    if (nodeEl?.dataset.nodeId && this.doc) {
      const pos = nodePosition(this.doc, nodeEl.dataset.nodeId);
      this.drag = {
        id: nodeEl.dataset.nodeId,
        el: nodeEl,
        startX: e.clientX,
        startY: e.clientY,
        origX: pos.x,
        origY: pos.y,
        moved: false,
      };
    } else {
      this.pan = {
        startX: e.clientX,
        startY: e.clientY,
        origX: this.panX,
        origY: this.panY,
      };
    }
  }

  private onMouseMove(e: MouseEvent): void {
    if (this.drag) {
      const dx = (e.clientX - this.drag.startX) / this.scale;
      const dy = (e.clientY - this.drag.startY) / this.scale;
      if (dx || dy) this.drag.moved = true;
      this.drag.el.style.left = `${this.drag.origX + dx}px`;
      this.drag.el.style.top = `${this.drag.origY + dy}px`;
    } else if (this.pan) {
      this.panX = this.pan.origX + (e.clientX - this.pan.startX);
      this.panY = this.pan.origY + (e.clientY - this.pan.startY);
      this.applyTransform();
    }
  }

  private onMouseUp(e: MouseEvent): void {
    if (this.armedKind) {
      const { x, y } = this.screenToWorld(e.clientX, e.clientY);
      this.callbacks.onDropNew(this.armedKind, x, y);
      this.armedKind = null;
      this.drag = null;
      this.pan = null;
      return;
    }
    if (this.drag) {
      const dx = (e.clientX - this.drag.startX) / this.scale;
      const dy = (e.clientY - this.drag.startY) / this.scale;
      if (this.drag.moved) {
        this.callbacks.onMoveNode(this.drag.id, this.drag.origX + dx, this.drag.origY + dy);
      } else {
        this.callbacks.onSelect(this.drag.id);
      }
      this.drag = null;
    } else if (this.pan) {
      const still = e.clientX === this.pan.startX && e.clientY === this.pan.startY;
      if (still) this.callbacks.onSelect(null);
      this.pan = null;
    }
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.1 : 1 / 1.1;
    this.scale = Math.min(2, Math.max(0.25, this.scale * factor));
    this.applyTransform();
  }
}
