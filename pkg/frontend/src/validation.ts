import { ApiError, NetworkError } from "./api";
import type { Diagnostic, ValidationReport } from "./types";

export interface ValidationHooks {
  run(): Promise<ValidationReport>;
  publish(): Promise<void>;
  focusNode(id: string): void;
}

// Diagnostics list plus the publish gate. Publish stays disabled until a
// validation round reports zero errors; warnings only badge it.

export class ValidationPanel {
  listEl: HTMLElement;
  badgeEl: HTMLElement;
  publishBtn: HTMLButtonElement;
  staleEl: HTMLElement;
  report: ValidationReport | null = null;

  constructor(
    root: HTMLElement,
    private hooks: ValidationHooks,
  ) {
    root.classList.add("validation-panel");

    const header = document.createElement("div");
    header.className = "panel-header";
    const title = document.createElement("span");
    title.textContent = "Validation";
    this.badgeEl = document.createElement("span");
    this.badgeEl.className = "badge";
    this.publishBtn = document.createElement("button");
    this.publishBtn.type = "button";
    this.publishBtn.className = "publish-btn";
    this.publishBtn.textContent = "Publish";
    this.publishBtn.disabled = true;
    this.publishBtn.addEventListener("click", () => void this.doPublish());
    header.append(title, this.badgeEl, this.publishBtn);
    root.appendChild(header);

    this.staleEl = document.createElement("div");
    this.staleEl.className = "banner banner-stale";
    this.staleEl.textContent = "Server unreachable; results below may be stale.";
    root.appendChild(this.staleEl);

    this.listEl = document.createElement("ul");
    this.listEl.className = "diagnostic-list";
    root.appendChild(this.listEl);
  }

  async refresh(): Promise<void> {
    let report: ValidationReport;
    try {
      report = await this.hooks.run();
    } catch (err) {
      if (err instanceof NetworkError || err instanceof ApiError) {
        this.staleEl.classList.add("visible");
        return;
      }
      throw err;
    }
    this.staleEl.classList.remove("visible");
    this.report = report;
    this.renderList(report.diagnostics);
    this.badgeEl.textContent = `${report.errors} errors, ${report.warnings} warnings`;
    this.badgeEl.classList.toggle("has-errors", report.errors > 0);
    this.badgeEl.classList.toggle("has-warnings", report.errors === 0 && report.warnings > 0);
    this.publishBtn.disabled = report.errors > 0;
  }

  /** A save happened; old results no longer describe the draft. */
  invalidate(): void {
    this.report = null;
    this.publishBtn.disabled = true;
    this.badgeEl.textContent = "not validated";
    this.badgeEl.classList.remove("has-errors", "has-warnings");
  }

  private renderList(diagnostics: Diagnostic[]): void {
    this.listEl.textContent = "";
    for (const diag of diagnostics) {
      const li = document.createElement("li");
      li.className = `diagnostic ${diag.severity}`;
      li.textContent = diag.node
        ? `${diag.severity.toUpperCase()} ${diag.code} ${diag.node}: ${diag.message}`
        : `${diag.severity.toUpperCase()} ${diag.code}: ${diag.message}`;
      if (diag.node) {
        const node = diag.node;
        li.classList.add("clickable");
        li.addEventListener("click", () => this.hooks.focusNode(node));
      }
      this.listEl.appendChild(li);
    }
    if (!diagnostics.length) {
      const li = document.createElement("li");
      li.className = "diagnostic clean";
      li.textContent = "No findings.";
      this.listEl.appendChild(li);
    }
  }

  private async doPublish(): Promise<void> {
    try {
      await this.hooks.publish();
    } catch (err) {
      if (err instanceof ApiError && err.code === "validation_failed") {
        this.renderList(err.diagnostics);
        this.publishBtn.disabled = true;
        return;
      }
      throw err;
    }
  }
}
