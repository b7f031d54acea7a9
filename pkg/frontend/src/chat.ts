import type { ApiClient } from "./api";
import { CHIP_COLOR } from "./colors";
import type { OutboundMessage } from "./types";

export interface ChatTarget {
  botId: string;
  channelToken: string;
  userId: string;
}

// Test-chat against the live server. Quick replies render as tappable
// buttons; a tap sends the label text exactly as typing it would.

export class ChatPanel {
  logEl: HTMLElement;
  input: HTMLInputElement;

  constructor(
    root: HTMLElement,
    private api: ApiClient,
    public target: ChatTarget,
  ) {
    root.classList.add("chat-panel");
    const header = document.createElement("div");
    header.className = "panel-header";
    const title = document.createElement("span");
    title.textContent = "Test chat";
    const resetBtn = document.createElement("button");
    resetBtn.type = "button";
    resetBtn.className = "chat-reset";
    resetBtn.textContent = "Reset";
    resetBtn.addEventListener("click", () => void this.reset());
    header.append(title, resetBtn);
    root.appendChild(header);

    this.logEl = document.createElement("div");
    this.logEl.className = "chat-log";
    root.appendChild(this.logEl);

    const bar = document.createElement("div");
    bar.className = "chat-bar";
    this.input = document.createElement("input");
    this.input.placeholder = "Say something…";
    this.input.addEventListener("keydown", (e) => {
      if (e.key === "Enter") void this.sendFromInput();
    });
    const sendBtn = document.createElement("button");
    sendBtn.type = "button";
    sendBtn.textContent = "Send";
    sendBtn.addEventListener("click", () => void this.sendFromInput());
    bar.append(this.input, sendBtn);
    root.appendChild(bar);
  }

  async reset(): Promise<void> {
    await this.api.resetSession(this.target.botId, this.target.userId);
    this.logEl.textContent = "";
  }

  private async sendFromInput(): Promise<void> {
    const text = this.input.value.trim();
    if (!text) return;
    this.input.value = "";
    await this.send(text);
  }

  async send(text: string): Promise<OutboundMessage[]> {
    this.bubble("user", text);
    const { messages } = await this.api.sendMessage(
      this.target.botId,
      this.target.channelToken,
      this.target.userId,
      text,
    );
    for (const msg of messages) this.renderMessage(msg);
    return messages;
  }

  private renderMessage(msg: OutboundMessage): void {
    const body = msg.kind === "image" ? `(image) ${msg.body}` : msg.body;
    this.bubble("bot", body);
    if (msg.quick_replies.length) {
      const row = document.createElement("div");
      row.className = "qr-row";
      for (const label of msg.quick_replies) {
        const btn = document.createElement("button");
        btn.type = "button";
        btn.className = "qr-chip";
        btn.setAttribute("style", `background:${CHIP_COLOR}`);
        btn.textContent = label;
        btn.addEventListener("click", () => {
          row.remove();
          void this.send(label);
        });
        row.appendChild(btn);
      }
      this.logEl.appendChild(row);
    }
    this.logEl.scrollTop = this.logEl.scrollHeight;
  }

  private bubble(role: "user" | "bot", text: string): void {
    const div = document.createElement("div");
    div.className = `chat-msg ${role}`;
    div.textContent = text;
    this.logEl.appendChild(div);
    this.logEl.scrollTop = this.logEl.scrollHeight;
  }
}
