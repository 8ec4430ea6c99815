import { bindInputs } from "./input.js";
import { parseServerMsg } from "./protocol.js";
import { render } from "./render.js";
import { applyServer, emptyState, setConnected } from "./state.js";
import type { UiState } from "./state.js";
import { Connection } from "./ws.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

let ui: UiState = emptyState();

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

const conn = new Connection(wsUrl(), {
  onMessage: (raw) => {
    const msg = parseServerMsg(raw);
    if (!msg) return; // not ours; ignore rather than guess
    ui = applyServer(ui, msg);
    render(root, ui);
  },
  onStatus: (connected) => {
    ui = setConnected(ui, connected);
    render(root, ui);
  },
});

bindInputs(root, window, () => ui, (msg) => conn.send(msg));
conn.open();
render(root, ui);
