import { KIND_COLORS, KIND_LABELS, PALETTE_ORDER } from "./colors";
import type { NodeKind } from "./types";

// Toolbar of the seven node kinds. Mousedown arms a drop on the canvas;
// a plain click adds the node at the viewport center as a fallback.

export class Palette {
  constructor(
    root: HTMLElement,
    onPick: (kind: NodeKind, viaClick: boolean) => void,
  ) {
    root.classList.add("palette");
    for (const kind of PALETTE_ORDER) {
      const item = document.createElement("div");
      item.className = `palette-item palette-${kind}`;
      item.dataset.kind = kind;
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.setAttribute("style", `background:${KIND_COLORS[kind]}`);
      const label = document.createElement("span");
      label.textContent = KIND_LABELS[kind];
      item.append(swatch, label);
      item.addEventListener("mousedown", (e) => {
        e.preventDefault();
        onPick(kind, false);
      });
      item.addEventListener("click", () => onPick(kind, true));
      root.appendChild(item);
    }
  }
}
