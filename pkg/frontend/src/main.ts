// Application wiring: one session, one in-flight mutation at a time,
// stateless re-render after every state change.

import { ApiError, SessionApi } from "./api";
import { Handlers, render } from "./render";
import type { SessionState } from "./types";

export class App {
  state: SessionState | null = null;
  sessionId = "";
  pending = false;

  constructor(
    private api: SessionApi,
    private root: HTMLElement,
  ) {}

  async start(pipelineSource: string): Promise<void> {
    const { id, state } = await this.api.create(pipelineSource);
    this.sessionId = id;
    this.update(state);
  }

  update(state: SessionState): void {
    this.state = state;
    this.redraw();
  }

  redraw(): void {
    if (!this.state) return;
    const handlers: Handlers = {
      onChoose: (oid) => this.mutate(() => this.api.choose(this.sessionId, oid)),
      onTile: (rx, ry) => this.mutate(() => this.api.tile(this.sessionId, rx, ry)),
      onUndo: () => this.mutate(() => this.api.undo(this.sessionId)),
    };
    render(this.state, this.root, handlers, this.pending);
  }

  undo(): void {
    this.mutate(() => this.api.undo(this.sessionId));
  }

  async mutate(run: () => Promise<SessionState>): Promise<void> {
    if (this.pending) return;
    this.pending = true;
    this.redraw();
    try {
      const state = await run();
      this.pending = false;
      this.update(state);
    } catch (exc) {
      this.pending = false;
      if (exc instanceof ApiError && exc.status === 409) {
        this.toast(`That option is stale: ${exc.message}`);
        this.update(await this.api.get(this.sessionId));
      } else if (exc instanceof ApiError) {
        this.toast(exc.message);
        this.redraw();
      } else {
        this.banner(`Network error: ${exc}. Retry?`, () => this.refresh());
        this.redraw();
      }
    }
  }

  async refresh(): Promise<void> {
    try {
      this.update(await this.api.get(this.sessionId));
      this.banner(null);
    } catch (exc) {
      this.banner(`Network error: ${exc}. Retry?`, () => this.refresh());
    }
  }

  toast(message: string): void {
    const node = this.ensure("toast");
    node.textContent = message;
    node.hidden = false;
    setTimeout(() => {
      node.hidden = true;
    }, 4000);
  }

  banner(message: string | null, retry?: () => void): void {
    const node = this.ensure("banner");
    if (message === null) {
      node.hidden = true;
      return;
    }
    node.replaceChildren(document.createTextNode(message));
    if (retry) {
      const btn = document.createElement("button");
      btn.textContent = "retry";
      btn.addEventListener("click", retry);
      node.appendChild(btn);
    }
    node.hidden = false;
  }

  private ensure(id: string): HTMLElement {
    let node = this.root.querySelector<HTMLElement>(`#${id}`);
    if (!node) {
      node = document.createElement("div");
      node.id = id;
      node.className = id;
      this.root.prepend(node);
    }
    return node;
  }
}

export function createApp(root: HTMLElement, base = ""): App {
  return new App(new SessionApi(base), root);
}
