// The client's entire picture of the session. Every field below is copied
// from a service message; the UI never computes its own answer to anything
// the service already decides (suggestions, cursor position, flags...).

import type {
  Features,
  LayoutGroup,
  ScanCursor,
  ServerMsg,
} from "./protocol.js";

export type UiState = {
  connected: boolean;
  text: string;
  suggestions: string[];
  archive: string[];
  features: Features | null; // null until the first snapshot arrives
  scan: ScanCursor | null;
  layout: LayoutGroup | null;
  scanPeriodMs: number;
  lastAck: string | null;
  lastError: string | null;
};

export function emptyState(): UiState {
  return {
    connected: false,
    text: "",
    suggestions: [],
    archive: [],
    features: null,
    scan: null,
    layout: null,
    scanPeriodMs: 0,
    lastAck: null,
    lastError: null,
  };
}

export function applyServer(ui: UiState, msg: ServerMsg): UiState {
  switch (msg.kind) {
    case "state": {
      const next: UiState = {
        ...ui,
        text: msg.text,
        suggestions: msg.suggestions,
        archive: msg.archive,
        features: msg.features,
        scan: msg.scan ?? null,
        lastError: null,
      };
      if (msg.layout) next.layout = msg.layout;
      if (typeof msg.scan_period_ms === "number") {
        next.scanPeriodMs = msg.scan_period_ms;
      }
      return next;
    }
    case "scan_state": {
      const { kind, ...cursor } = msg;
      void kind;
      return { ...ui, scan: cursor };
    }
    case "ack":
      return { ...ui, lastAck: msg.expanded, lastError: null };
    case "error":
      return { ...ui, lastError: msg.detail };
  }
}

export function setConnected(ui: UiState, connected: boolean): UiState {
  return { ...ui, connected };
}
