import { renderHighlighted } from "./highlight";
import { AgentView, IndexEntry, StateView, TranscriptEntry, UtteranceView } from "./types";

export type Handlers = {
  onToggleSelect(agentId: string): void;
  onSelectAll(): void;
  onClearSelection(): void;
  onPin(kind: "agent" | "criterion" | "option", key: string): void;
  onUnpin(kind: "agent" | "criterion" | "option", key: string): void;
  onHide(key: string, hidden: boolean): void;
  onHoverKeyword(key: string | null): void;
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function agentPopover(agent: AgentView): HTMLElement {
  const pop = el("div", "agent-popover");
  pop.appendChild(el("p", "popover-descriptor", agent.descriptor));
  const criteria = el("p", "popover-criteria");
  criteria.append("Values: ");
  agent.valued_criteria.forEach((c, i) => {
    if (i > 0) criteria.append(", ");
    const mark = el("mark", "hl-criterion", c.display);
    mark.dataset.key = c.key;
    criteria.appendChild(mark);
  });
  pop.appendChild(criteria);
  const option = el("p", "popover-option");
  option.append("Chose: ");
  if (agent.chosen_option.source_url) {
    const link = el("a", "hl-option option-link", agent.chosen_option.display);
    link.setAttribute("href", agent.chosen_option.source_url);
    link.setAttribute("target", "_blank");
    link.setAttribute("rel", "noreferrer");
    option.appendChild(link);
  } else {
    const mark = el("mark", "hl-option", agent.chosen_option.display);
    mark.dataset.key = agent.chosen_option.key;
    option.appendChild(mark);
  }
  pop.appendChild(option);
  return pop;
}

export function renderConversationSpace(
  container: HTMLElement,
  state: StateView,
  selected: Set<string>,
  handlers: Handlers,
): void {
  container.textContent = "";
  const bubblesByAgent = new Map<string, UtteranceView[]>();
  for (const utterance of state.current_utterances) {
    if (!utterance.speaker_agent_id) continue;
    const list = bubblesByAgent.get(utterance.speaker_agent_id) ?? [];
    list.push(utterance);
    bubblesByAgent.set(utterance.speaker_agent_id, list);
  }

  for (const agent of state.agents) {
    if (agent.hidden) continue;
    const card = el("div", "agent-card");
    card.dataset.agentId = agent.agent_id;
    card.dataset.name = agent.name;
    if (selected.has(agent.agent_id)) card.classList.add("selected");

    const bubbles = bubblesByAgent.get(agent.agent_id) ?? [];
    for (const utterance of bubbles) {
      const bubble = el("div", "bubble");
      bubble.appendChild(renderHighlighted(utterance.text, utterance.spans));
      card.appendChild(bubble);
    }

    const icon = el("div", "agent-icon", agent.appearance.glyph);
    icon.style.backgroundColor = agent.appearance.color;
    card.appendChild(icon);
    card.appendChild(el("div", "agent-name", agent.name));
    card.appendChild(agentPopover(agent));

    card.addEventListener("click", () => handlers.onToggleSelect(agent.agent_id));
    container.appendChild(card);
  }
}

function keywordRow(
  entry: IndexEntry,
  pinned: boolean,
  handlers: Handlers,
): HTMLElement {
  const row = el("li", "keyword-row");
  row.dataset.key = entry.key;
  const label = el(
    "mark",
    entry.kind === "criterion" ? "hl-criterion" : "hl-option",
    entry.display,
  );
  label.dataset.key = entry.key;
  row.appendChild(label);
  row.appendChild(el("span", "count", String(entry.count)));

  const pinBtn = el("button", "pin-btn", pinned ? "unpin" : "pin");
  pinBtn.dataset.key = entry.key;
  pinBtn.addEventListener("click", (event) => {
    event.stopPropagation();
    if (pinned) handlers.onUnpin(entry.kind, entry.key);
    else handlers.onPin(entry.kind, entry.key);
  });
  row.appendChild(pinBtn);

  const hideBtn = el("button", "hide-btn", "hide");
  hideBtn.addEventListener("click", (event) => {
    event.stopPropagation();
    handlers.onHide(entry.key, true);
  });
  row.appendChild(hideBtn);

  row.addEventListener("mouseenter", () => handlers.onHoverKeyword(entry.key));
  row.addEventListener("mouseleave", () => handlers.onHoverKeyword(null));
  return row;
}

export function renderHistoryPanel(
  container: HTMLElement,
  state: StateView,
  handlers: Handlers,
): void {
  container.textContent = "";
  container.appendChild(el("h2", undefined, "Conversation history"));

  const agentsHeader = el("h3", undefined, "Agents");
  container.appendChild(agentsHeader);
  const agentList = el("ul", "history-agents");
  for (const agent of state.agents) {
    if (agent.hidden) continue;
    const row = el("li", "history-agent-row");
    row.dataset.agentId = agent.agent_id;
    row.appendChild(el("span", "agent-chip", agent.name));
    const pinned = state.preference_space.pinned_agents.includes(agent.name.toLowerCase());
    const pinBtn = el("button", "pin-btn", pinned ? "unpin" : "pin");
    pinBtn.addEventListener("click", () => {
      if (pinned) handlers.onUnpin("agent", agent.name);
      else handlers.onPin("agent", agent.name);
    });
    row.appendChild(pinBtn);
    const hideBtn = el("button", "hide-btn", "hide");
    hideBtn.addEventListener("click", () => handlers.onHide(agent.name, true));
    row.appendChild(hideBtn);
    agentList.appendChild(row);
  }
  container.appendChild(agentList);

  for (const kind of ["criterion", "option"] as const) {
    container.appendChild(el("h3", undefined, kind === "criterion" ? "Criteria" : "Options"));
    const list = el("ul", `history-${kind}s`);
    for (const entry of state.index) {
      if (entry.kind !== kind || entry.hidden) continue;
      const bucket =
        kind === "criterion"
          ? state.preference_space.pinned_criteria
          : state.preference_space.pinned_options;
      list.appendChild(keywordRow(entry, bucket.includes(entry.key), handlers));
    }
    container.appendChild(list);
  }
}

export function renderPreferencePanel(
  container: HTMLElement,
  state: StateView,
  handlers: Handlers,
): void {
  container.textContent = "";
  container.appendChild(el("h2", undefined, "Preference space"));
  const sections: Array<["agent" | "criterion" | "option", string, string[]]> = [
    ["agent", "Agents", state.preference_space.pinned_agents],
    ["criterion", "Criteria", state.preference_space.pinned_criteria],
    ["option", "Options", state.preference_space.pinned_options],
  ];
  for (const [kind, title, keys] of sections) {
    container.appendChild(el("h3", undefined, title));
    const list = el("ul", `pref-${kind}s`);
    for (const key of keys) {
      const row = el("li", "pref-row");
      row.dataset.key = key;
      const display =
        kind === "agent"
          ? (state.agents.find((a) => a.name.toLowerCase() === key)?.name ?? key)
          : (state.index.find((e) => e.key === key)?.display ?? key);
      row.appendChild(el("span", "pref-label", display));
      const unpinBtn = el("button", "unpin-btn", "remove");
      unpinBtn.addEventListener("click", () => handlers.onUnpin(kind, key));
      row.appendChild(unpinBtn);
      list.appendChild(row);
    }
    container.appendChild(list);
  }
}

export function renderThreadModal(container: HTMLElement, entries: TranscriptEntry[]): void {
  container.textContent = "";
  const modal = el("div", "thread-modal");
  modal.appendChild(el("h2", undefined, "Full conversation"));
  const list = el("ol", "thread-list");
  for (const entry of entries) {
    const row = el("li", `thread-${entry.type}`);
    const who = entry.type === "user" ? "You" : (entry.speaker_name ?? entry.type);
    row.appendChild(el("strong", undefined, `${who}: `));
    if (entry.spans && entry.spans.length) {
      row.appendChild(renderHighlighted(entry.text, entry.spans));
    } else {
      row.append(entry.text);
    }
    list.appendChild(row);
  }
  modal.appendChild(list);
  const close = el("button", "close-thread", "close");
  close.addEventListener("click", () => {
    container.hidden = true;
  });
  modal.appendChild(close);
  container.appendChild(modal);
  container.hidden = false;
}

export function applyAssociationHighlights(
  root: HTMLElement,
  linked: { agents: string[]; related_keys: string[] } | null,
): void {
  root.querySelectorAll(".assoc-linked").forEach((node) => node.classList.remove("assoc-linked"));
  if (!linked) return;
  for (const agentId of linked.agents) {
    root
      .querySelectorAll(`[data-agent-id="${agentId}"]`)
      .forEach((node) => node.classList.add("assoc-linked"));
  }
  for (const key of linked.related_keys) {
    root
      .querySelectorAll(`.keyword-row[data-key="${CSS.escape(key)}"]`)
      .forEach((node) => node.classList.add("assoc-linked"));
  }
}
