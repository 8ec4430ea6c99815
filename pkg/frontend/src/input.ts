// DOM events in, client messages out. All listeners are delegated through
// the root (plus one window-level key handler), so render() can rebuild the
// tree without re-binding anything. While disconnected nothing is sent and
// nothing is queued: the press just disappears, matching a dead phone line.

import type { ClientMsg, Features } from "./protocol.js";
import type { UiState } from "./state.js";

export type Sender = (msg: ClientMsg) => void;

function isTextInput(target: EventTarget | null): boolean {
  return target instanceof HTMLInputElement && target.id === "text-input";
}

export function bindInputs(
  root: HTMLElement,
  keySource: EventTarget,
  getUi: () => UiState,
  send: Sender,
): () => void {
  const sendIfConnected = (msg: ClientMsg) => {
    if (getUi().connected) send(msg);
  };

  const onClick = (ev: Event) => {
    const target = ev.target;
    if (!(target instanceof HTMLElement)) return;

    const suggestion = target.closest<HTMLElement>("[data-suggestion-index]");
    if (suggestion) {
      sendIfConnected({
        kind: "pick_suggestion",
        index: Number(suggestion.dataset.suggestionIndex),
      });
      return;
    }

    const row = target.closest<HTMLElement>("[data-archive-index]");
    if (row) {
      sendIfConnected({
        kind: "pick_archive",
        index: Number(row.dataset.archiveIndex),
      });
      return;
    }

    const toggle = target.closest<HTMLElement>("[data-feature]");
    if (toggle) {
      const feature = toggle.dataset.feature as keyof Features;
      const flags = getUi().features;
      if (flags) {
        sendIfConnected({ kind: "set_feature", feature, on: !flags[feature] });
      }
      return;
    }

    if (target.closest("#switch")) {
      sendIfConnected({ kind: "press_switch" });
      return;
    }
    if (target.closest("#speak")) {
      sendIfConnected({ kind: "speak" });
    }
  };

  const onInput = (ev: Event) => {
    if (isTextInput(ev.target)) {
      sendIfConnected({ kind: "type_text", text: (ev.target as HTMLInputElement).value });
    }
  };

  const onKeydown = (ev: Event) => {
    const key = ev as KeyboardEvent;
    if (key.key === " " && !isTextInput(key.target)) {
      // the whole window is the switch; one press per keydown, and a held
      // key must not machine-gun selections
      if (!key.repeat) sendIfConnected({ kind: "press_switch" });
      key.preventDefault();
      return;
    }
    if (key.key === "Enter" && isTextInput(key.target)) {
      sendIfConnected({ kind: "speak" });
      key.preventDefault();
    }
  };

  root.addEventListener("click", onClick);
  root.addEventListener("input", onInput);
  keySource.addEventListener("keydown", onKeydown);
  return () => {
    root.removeEventListener("click", onClick);
    root.removeEventListener("input", onInput);
    keySource.removeEventListener("keydown", onKeydown);
  };
}
