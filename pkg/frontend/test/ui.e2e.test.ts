// End-to-end client test against the real scripted service (criterion: first
// message renders highlighted agent cards; pin + toggle flow puts the pin in
// the outgoing traffic). Runs in jsdom with a recording fetch, no live web.

import { beforeAll, describe, expect, inject, it } from "vitest";

import { initApp, type App } from "../src/app";

type RecordedCall = { url: string; method: string; body: unknown };

const recorded: RecordedCall[] = [];
const realFetch = globalThis.fetch;

globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
  const url = typeof input === "string" ? input : input instanceof URL ? input.href : input.url;
  recorded.push({
    url,
    method: init?.method ?? "GET",
    body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
  });
  return realFetch(input, init);
}) as typeof fetch;

async function until(condition: () => boolean, what: string, timeoutMs = 20_000): Promise<void> {
  const started = Date.now();
  while (!condition()) {
    if (Date.now() - started > timeoutMs) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 50));
  }
}

function messagePosts(): RecordedCall[] {
  return recorded.filter((c) => c.method === "POST" && c.url.endsWith("/messages"));
}

describe("council web client against the scripted service", () => {
  let app: App;
  let root: HTMLElement;

  beforeAll(async () => {
    document.body.innerHTML = '<div id="root"></div>';
    root = document.getElementById("root") as HTMLElement;
    app = await initApp(root, inject("apiBase"));
  });

  it("sends the first message and renders highlighted agent cards", async () => {
    const input = root.querySelector<HTMLInputElement>("#message-input")!;
    input.value = "I need a camera for a new hobby";
    root.querySelector<HTMLButtonElement>("#send-button")!.click();

    await until(() => root.querySelectorAll(".agent-card").length >= 3, "agent cards");
    const cards = root.querySelectorAll(".agent-card");
    expect(cards.length).toBeGreaterThanOrEqual(3);

    const criteria = root.querySelectorAll(".bubble mark.hl-criterion");
    const options = root.querySelectorAll(".bubble mark.hl-option");
    expect(criteria.length).toBeGreaterThan(0);
    expect(options.length).toBeGreaterThan(0);

    const names = [...cards].map((card) => card.getAttribute("data-name"));
    expect(names).toContain("Jamie");

    // Profile popover mirrors the registry: criteria plus a source hyperlink.
    const jamie = [...cards].find((card) => card.getAttribute("data-name") === "Jamie")!;
    const popover = jamie.querySelector(".agent-popover")!;
    expect(popover.textContent).toContain("easy to use");
    const link = popover.querySelector<HTMLAnchorElement>("a.option-link");
    expect(link?.getAttribute("href")).toMatch(/^https:/);
  });

  it("pins a criterion and the preference panel shows it immediately", async () => {
    const row = [...root.querySelectorAll<HTMLElement>(".keyword-row")].find(
      (r) => r.dataset.key === "easy to use",
    );
    expect(row).toBeTruthy();
    row!.querySelector<HTMLButtonElement>(".pin-btn")!.click();

    await until(
      () =>
        [...root.querySelectorAll<HTMLElement>(".pref-row")].some(
          (r) => r.dataset.key === "easy to use",
        ),
      "pinned row in preference panel",
    );

    const pinCall = recorded.find((c) => c.method === "POST" && c.url.endsWith("/pins"));
    expect(pinCall?.body).toEqual({ kind: "criterion", key: "easy to use" });
  });

  it("sends a second message with the preference toggle on", async () => {
    const toggle = root.querySelector<HTMLInputElement>("#preference-toggle")!;
    toggle.checked = true;
    const input = root.querySelector<HTMLInputElement>("#message-input")!;
    input.value = "Something easy to use please";
    root.querySelector<HTMLButtonElement>("#send-button")!.click();

    await until(() => app.state?.turn_count === 2, "second turn committed");

    const posts = messagePosts();
    expect(posts.length).toBe(2);
    const second = posts[1].body as Record<string, unknown>;
    expect(second.preference_toggle).toBe(true);
    expect(second.text).toBe("Something easy to use please");

    // Server-side truth: the pinned criterion is flagged in the fresh state.
    const entry = app.state!.index.find((e) => e.key === "easy to use");
    expect(entry?.pinned).toBe(true);
    expect(app.state!.preference_space.pinned_criteria).toEqual(["easy to use"]);

    // Conversation space shows only the latest turn's bubbles.
    const turns = new Set(app.state!.current_utterances.map((u) => u.turn));
    expect(turns).toEqual(new Set([2]));
  });

  it("keeps the client as a pure view: re-fetching reproduces the render", async () => {
    const before = root.querySelector("#history-panel")!.innerHTML;
    await app.refresh();
    expect(root.querySelector("#history-panel")!.innerHTML).toBe(before);
  });

  it("debate requires two selected agents and carries their ids", async () => {
    const cards = [...root.querySelectorAll<HTMLElement>(".agent-card")];
    const alex = cards.find((c) => c.dataset.name === "Alex")!;
    const jamie = cards.find((c) => c.dataset.name === "Jamie")!;
    alex.click();
    jamie.click();
    await until(
      () => !root.querySelector<HTMLButtonElement>("#debate-button")!.disabled,
      "debate button enabled",
    );
    root.querySelector<HTMLButtonElement>("#debate-button")!.click();
    await until(() => app.state?.turn_count === 3, "debate turn committed");

    const posts = messagePosts();
    const debate = posts[posts.length - 1].body as Record<string, unknown>;
    expect(debate.turn_kind).toBe("debate");
    expect((debate.tagged_agent_ids as string[]).sort()).toEqual(
      [alex.dataset.agentId, jamie.dataset.agentId].sort(),
    );
  });

  it("surfaces provider failure without losing state", async () => {
    // The scripted fixture has three completions; a fourth turn exhausts it.
    const turnBefore = app.state!.turn_count;
    const input = root.querySelector<HTMLInputElement>("#message-input")!;
    input.value = "one more question";
    root.querySelector<HTMLButtonElement>("#send-button")!.click();

    await until(() => !root.querySelector<HTMLDivElement>("#notice")!.hidden, "error notice");
    await until(() => !root.querySelector<HTMLInputElement>("#message-input")!.disabled, "input re-enabled");
    expect(app.state!.turn_count).toBe(turnBefore);
  });

  it("opens the full-thread modal from the button left of the input", async () => {
    root.querySelector<HTMLButtonElement>("#thread-button")!.click();
    await until(() => !root.ownerDocument.getElementById("thread-container")!.hidden, "thread modal");
    const items = root.querySelectorAll(".thread-list li");
    // 3 user messages + persona utterances across 3 turns.
    expect(items.length).toBeGreaterThanOrEqual(8);
    expect([...items].some((li) => li.className === "thread-user")).toBe(true);
  });

  it("hovering a criterion highlights the agents that value it", async () => {
    const row = [...root.querySelectorAll<HTMLElement>(".keyword-row")].find(
      (r) => r.dataset.key === "easy to use",
    )!;
    row.dispatchEvent(new MouseEvent("mouseenter", { bubbles: false }));
    await until(
      () =>
        [...root.querySelectorAll<HTMLElement>(".agent-card.assoc-linked")].some(
          (c) => c.dataset.name === "Jamie",
        ),
      "Jamie card highlighted",
    );
    row.dispatchEvent(new MouseEvent("mouseleave", { bubbles: false }));
    await until(
      () => root.querySelectorAll(".assoc-linked").length === 0,
      "highlights cleared",
    );
  });

  it("hiding a keyword removes it from the panel but keeps its count server-side", async () => {
    const row = [...root.querySelectorAll<HTMLElement>(".keyword-row")].find(
      (r) => r.dataset.key === "portability",
    )!;
    const countBefore = app.state!.index.find((e) => e.key === "portability")!.count;
    row.querySelector<HTMLButtonElement>(".hide-btn")!.click();
    await until(
      () =>
        ![...root.querySelectorAll<HTMLElement>(".keyword-row")].some(
          (r) => r.dataset.key === "portability",
        ),
      "hidden row removed from panel",
    );
    const entry = app.state!.index.find((e) => e.key === "portability")!;
    expect(entry.hidden).toBe(true);
    expect(entry.count).toBe(countBefore);
  });
});
