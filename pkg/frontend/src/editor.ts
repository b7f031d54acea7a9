import { ApiClient, ApiError, NetworkError } from "./api";
import { History } from "./history";
import { parseDocument, serializeDocument } from "./model";
import type { GraphDocument, VersionMeta } from "./types";

// Draft editing state: one open version, a history of snapshots, and the
// save/conflict machinery. Dirty is derived by comparing against the last
// snapshot the server acknowledged, so a failed save leaves it set.

export class Editor {
  doc: GraphDocument | null = null;
  meta: VersionMeta | null = null;
  history = new History("");
  onChange: () => void = () => {};

  private lastSaved = "";
  private conflictEl: HTMLElement;
  private retryEl: HTMLElement;

  constructor(
    private api: ApiClient,
    bannerRoot: HTMLElement,
  ) {
    this.conflictEl = banner(
      bannerRoot,
      "banner banner-conflict",
      "This draft changed somewhere else.",
      "Reload",
      () => void this.reload(),
    );
    this.retryEl = banner(
      bannerRoot,
      "banner banner-retry",
      "Could not reach the server. Your changes are still here.",
      "Retry",
      () => void this.save(),
    );
  }

  get dirty(): boolean {
    return this.doc !== null && serializeDocument(this.doc) !== this.lastSaved;
  }

  get graphId(): string {
    return this.meta?.graph_id ?? "";
  }

  get versionRef(): string {
    return this.meta?.version_id ?? "";
  }

  async open(graphId: string, ref: string): Promise<void> {
    const { version, document } = await this.api.getVersion(graphId, ref);
    this.meta = version;
    this.doc = document;
    this.lastSaved = serializeDocument(document);
    this.history.reset(this.lastSaved);
    this.hideBanners();
    this.onChange();
  }

  async reload(): Promise<void> {
    if (!this.meta) return;
    await this.open(this.meta.graph_id, this.meta.version_id);
  }

  /** Apply one mutation as a single undoable step. */
  edit(mutate: (doc: GraphDocument) => void): void {
    if (!this.doc) return;
    mutate(this.doc);
    if (this.history.push(serializeDocument(this.doc))) this.onChange();
  }

  undo(): void {
    const snap = this.history.undo();
    if (snap !== null) {
      this.doc = parseDocument(snap);
      this.onChange();
    }
  }

  redo(): void {
    const snap = this.history.redo();
    if (snap !== null) {
      this.doc = parseDocument(snap);
      this.onChange();
    }
  }

  async save(): Promise<boolean> {
    if (!this.doc || !this.meta) return false;
    const snapshot = serializeDocument(this.doc);
    try {
      this.meta = await this.api.putVersion(
        this.meta.graph_id,
        this.meta.version_id,
        this.doc,
        this.meta.revision,
      );
    } catch (err) {
      if (err instanceof ApiError && err.code === "stale_revision") {
        this.conflictEl.classList.add("visible");
      } else if (err instanceof NetworkError) {
        this.retryEl.classList.add("visible");
      } else {
        throw err;
      }
      return false;
    }
    this.lastSaved = snapshot;
    this.hideBanners();
    this.onChange();
    return true;
  }

  private hideBanners(): void {
    this.conflictEl.classList.remove("visible");
    this.retryEl.classList.remove("visible");
  }
}

function banner(
  root: HTMLElement,
  cls: string,
  text: string,
  actionLabel: string,
  action: () => void,
): HTMLElement {
  const el = document.createElement("div");
  el.className = cls;
  const span = document.createElement("span");
  span.textContent = text;
  const btn = document.createElement("button");
  btn.type = "button";
  btn.textContent = actionLabel;
  btn.addEventListener("click", action);
  el.append(span, btn);
  root.appendChild(el);
  return el;
}
