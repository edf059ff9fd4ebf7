import { CouncilApi } from "./api";
import {
  applyAssociationHighlights,
  Handlers,
  renderConversationSpace,
  renderHistoryPanel,
  renderPreferencePanel,
  renderThreadModal,
} from "./ui";
import { ApiError, StateView, TurnKind } from "./types";

// The server is the single source of truth: every action round-trips and the
// view re-renders from a fresh GET of the session.
export class App {
  api: CouncilApi;
  sessionId = "";
  state: StateView | null = null;
  selected = new Set<string>();
  inFlight = false;

  private root: HTMLElement;

  constructor(root: HTMLElement, apiBase: string) {
    this.root = root;
    this.api = new CouncilApi(apiBase);
  }

  async start(): Promise<void> {
    this.root.innerHTML = `
      <div class="layout">
        <section class="conversation-region">
          <div id="conversation-space" class="conversation-space"></div>
          <div id="notice" class="notice" hidden></div>
          <div class="composer">
            <button id="thread-button" title="Full conversation">&#9776;</button>
            <input id="message-input" type="text" placeholder="Message the agents..." />
            <label class="toggle-label">
              <input id="preference-toggle" type="checkbox" />
              use my preferences
            </label>
            <button id="send-button">Send</button>
            <button id="debate-button" disabled>Debate</button>
          </div>
          <div class="selection-tools">
            <button id="select-all">select all</button>
            <button id="clear-selection">clear</button>
            <span id="selection-count"></span>
          </div>
        </section>
        <aside class="side-region">
          <section id="history-panel" class="history-panel"></section>
          <section id="preference-panel" class="preference-panel"></section>
        </aside>
      </div>
      <div id="thread-container" class="thread-container" hidden></div>
    `;
    this.wireComposer();
    this.sessionId = await this.api.createSession();
    await this.refresh();
  }

  private query<T extends HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node;
  }

  private wireComposer(): void {
    this.query<HTMLButtonElement>("#send-button").addEventListener("click", () => {
      void this.send("chat");
    });
    this.query<HTMLButtonElement>("#debate-button").addEventListener("click", () => {
      void this.send("debate");
    });
    this.query<HTMLInputElement>("#message-input").addEventListener("keydown", (event) => {
      if (event.key === "Enter") void this.send("chat");
    });
    this.query<HTMLButtonElement>("#thread-button").addEventListener("click", () => {
      void this.openThread();
    });
    this.query<HTMLButtonElement>("#select-all").addEventListener("click", () => {
      this.handlers.onSelectAll();
    });
    this.query<HTMLButtonElement>("#clear-selection").addEventListener("click", () => {
      this.handlers.onClearSelection();
    });
  }

  private notice(text: string | null): void {
    const box = this.query<HTMLDivElement>("#notice");
    if (text === null) {
      box.hidden = true;
      box.textContent = "";
    } else {
      box.hidden = false;
      box.textContent = text;
    }
  }

  private setBusy(busy: boolean): void {
    this.inFlight = busy;
    this.query<HTMLInputElement>("#message-input").disabled = busy;
    this.query<HTMLButtonElement>("#send-button").disabled = busy;
    const debate = this.query<HTMLButtonElement>("#debate-button");
    debate.disabled = busy || this.selected.size < 2;
    this.root.classList.toggle("busy", busy);
  }

  async refresh(): Promise<void> {
    this.state = await this.api.getState(this.sessionId);
    const known = new Set(this.state.agents.map((a) => a.agent_id));
    for (const id of [...this.selected]) if (!known.has(id)) this.selected.delete(id);
    this.renderAll();
    this.root.dispatchEvent(new CustomEvent("council:updated"));
  }

  private renderAll(): void {
    if (!this.state) return;
    renderConversationSpace(
      this.query("#conversation-space"),
      this.state,
      this.selected,
      this.handlers,
    );
    renderHistoryPanel(this.query("#history-panel"), this.state, this.handlers);
    renderPreferencePanel(this.query("#preference-panel"), this.state, this.handlers);
    this.query<HTMLSpanElement>("#selection-count").textContent = this.selected.size
      ? `${this.selected.size} selected`
      : "";
    this.query<HTMLButtonElement>("#debate-button").disabled =
      this.inFlight || this.selected.size < 2;
  }

  async send(kind: TurnKind): Promise<void> {
    if (this.inFlight) return;
    const input = this.query<HTMLInputElement>("#message-input");
    const toggle = this.query<HTMLInputElement>("#preference-toggle");
    const text = input.value.trim();
    if (!text && kind === "chat") return;
    if (kind === "debate" && this.selected.size < 2) {
      this.notice("Select at least two agents to start a debate.");
      return;
    }
    this.notice(null);
    this.setBusy(true);
    try {
      await this.api.sendMessage(this.sessionId, {
        text,
        tagged_agent_ids: [...this.selected],
        preference_toggle: toggle.checked,
        turn_kind: kind,
      });
      input.value = "";
      await this.refresh();
    } catch (error) {
      // A failed turn changes nothing server-side; re-fetch to prove it and
      // let the user try again.
      if (error instanceof ApiError) {
        this.notice(
          error.status === 409
            ? "A turn is already running; hang on."
            : `The agents could not respond (${error.status}): ${error.message}`,
        );
      } else {
        this.notice(`Network problem: ${String(error)}`);
      }
      await this.refresh().catch(() => undefined);
    } finally {
      this.setBusy(false);
    }
  }

  async openThread(): Promise<void> {
    const entries = await this.api.getTranscript(this.sessionId);
    renderThreadModal(this.query("#thread-container"), entries);
  }

  handlers: Handlers = {
    onToggleSelect: (agentId) => {
      if (this.selected.has(agentId)) this.selected.delete(agentId);
      else this.selected.add(agentId);
      this.renderAll();
    },
    onSelectAll: () => {
      for (const agent of this.state?.agents ?? []) {
        if (!agent.hidden) this.selected.add(agent.agent_id);
      }
      this.renderAll();
    },
    onClearSelection: () => {
      this.selected.clear();
      this.renderAll();
    },
    onPin: (kind, key) => {
      void this.mutate(() => this.api.pin(this.sessionId, kind, key));
    },
    onUnpin: (kind, key) => {
      void this.mutate(() => this.api.unpin(this.sessionId, kind, key));
    },
    onHide: (key, hidden) => {
      void this.mutate(() => this.api.setVisibility(this.sessionId, key, hidden));
    },
    onHoverKeyword: (key) => {
      if (key === null) {
        applyAssociationHighlights(this.root, null);
        return;
      }
      void this.api
        .associations(this.sessionId, key)
        .then((linked) => applyAssociationHighlights(this.root, linked))
        .catch((error) => {
          if (error instanceof ApiError && error.status === 404) {
            // stale key after a hide/refresh race: repaint from the server
            void this.refresh();
          }
        });
    },
  };

  private async mutate(call: () => Promise<unknown>): Promise<void> {
    try {
      await call();
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.notice("That item no longer exists; refreshing.");
      } else {
        this.notice(`Action failed: ${String(error)}`);
      }
    }
    await this.refresh();
  }
}

export async function initApp(root: HTMLElement, apiBase = ""): Promise<App> {
  const app = new App(root, apiBase);
  await app.start();
  return app;
}

declare global {
  interface Window {
    councilApp?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("council-root")) {
  const root = document.getElementById("council-root") as HTMLElement;
  const base = root.dataset.apiBase ?? "";
  void initApp(root, base).then((app) => {
    window.councilApp = app;
  });
}
