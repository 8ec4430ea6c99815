// DOM construction from UiState. render() rebuilds the page wholesale
// (the state is tiny) and attaches no listeners; input.ts wires events by
// delegation on the root so rebuilding stays cheap and safe.

import { isGroup } from "./protocol.js";
import type { Features, LayoutGroup } from "./protocol.js";
import type { UiState } from "./state.js";

export const MAX_SUGGESTIONS = 8;

const FEATURE_LABELS: Record<keyof Features, string> = {
  archive: "Archive",
  completion: "Completion",
  abbrev: "Abbreviations",
  scankb: "Scan keys",
};

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

// walk the group path the service reported; bail out where it stops
// matching so a stale cursor can never point outside the rendered grid
export function currentLevel(layout: LayoutGroup, path: number[]): LayoutGroup {
  let level = layout;
  for (const idx of path) {
    const child = level.children[idx];
    if (!child || !isGroup(child)) break;
    level = child;
  }
  return level;
}

function renderTextPanel(ui: UiState): HTMLElement {
  const panel = el("section", "text-panel");
  const input = document.createElement("input");
  input.type = "text";
  input.id = "text-input";
  input.value = ui.text;
  input.placeholder = "type here, or scan below";
  input.setAttribute("aria-label", "message text");
  panel.appendChild(input);

  const speak = el("button", "speak", "Speak") as HTMLButtonElement;
  speak.id = "speak";
  panel.appendChild(speak);
  return panel;
}

function renderSuggestions(ui: UiState): HTMLElement {
  const panel = el("section", "suggestions-panel");
  panel.appendChild(el("h2", undefined, "Suggestions"));
  const list = el("ol", "suggestions");
  for (const [i, word] of ui.suggestions.slice(0, MAX_SUGGESTIONS).entries()) {
    const item = el("li", "suggestion", word);
    item.dataset.suggestionIndex = String(i);
    list.appendChild(item);
  }
  panel.appendChild(list);
  return panel;
}

function renderArchive(ui: UiState): HTMLElement {
  const panel = el("section", "archive-panel");
  panel.appendChild(el("h2", undefined, "Recent messages"));
  const list = el("ul", "archive");
  for (const [i, message] of ui.archive.entries()) {
    const item = el("li", "archive-row", message);
    item.dataset.archiveIndex = String(i);
    list.appendChild(item);
  }
  panel.appendChild(list);
  return panel;
}

function renderKeyboard(ui: UiState): HTMLElement {
  const panel = el("section", "keyboard-panel");
  if (!ui.features?.scankb) {
    panel.appendChild(el("p", "muted", "scanning keyboard is off"));
    return panel;
  }
  if (!ui.layout || !ui.scan) return panel;

  const level = currentLevel(ui.layout, ui.scan.path);
  panel.appendChild(el("h2", undefined, level.label));
  const grid = el("div", "keyboard");
  const cursor = Math.min(Math.max(ui.scan.cursor, 0), level.children.length - 1);
  for (const [i, child] of level.children.entries()) {
    const cls = isGroup(child) ? "key group" : "key";
    const cell = el("div", i === cursor ? cls + " highlight" : cls, child.label);
    grid.appendChild(cell);
  }
  panel.appendChild(grid);

  const press = el("button", "switch", "Press switch (or spacebar)");
  press.id = "switch";
  panel.appendChild(press);
  return panel;
}

function renderToggles(ui: UiState): HTMLElement {
  const bar = el("section", "toggles");
  if (!ui.features) return bar;
  for (const name of Object.keys(FEATURE_LABELS) as (keyof Features)[]) {
    const button = el("button", "toggle", FEATURE_LABELS[name]);
    button.dataset.feature = name;
    button.setAttribute("aria-pressed", ui.features[name] ? "true" : "false");
    bar.appendChild(button);
  }
  return bar;
}

export function render(root: HTMLElement, ui: UiState): void {
  const hadFocus =
    document.activeElement instanceof HTMLInputElement &&
    document.activeElement.id === "text-input";

  root.textContent = "";

  if (!ui.connected) {
    root.appendChild(el("div", "banner reconnect", "connection lost, retrying"));
  }
  if (ui.lastError) {
    root.appendChild(el("div", "banner error", ui.lastError));
  }

  root.appendChild(renderTextPanel(ui));

  const middle = el("div", "middle");
  middle.appendChild(renderArchive(ui));
  middle.appendChild(renderSuggestions(ui));
  root.appendChild(middle);

  root.appendChild(renderKeyboard(ui));
  root.appendChild(renderToggles(ui));

  if (ui.lastAck) {
    root.appendChild(el("div", "status", `spoke: ${ui.lastAck}`));
  }

  if (hadFocus) {
    const input = root.querySelector<HTMLInputElement>("#text-input");
    if (input) {
      input.focus();
      const end = input.value.length;
      input.setSelectionRange(end, end);
    }
  }
}
