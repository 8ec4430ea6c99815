// Wire shapes for the service's /ws JSON protocol, both directions.
// These mirror what the daemon actually sends; nothing is invented here.

export type Features = {
  archive: boolean;
  completion: boolean;
  abbrev: boolean;
  scankb: boolean;
};

export const FEATURE_NAMES: readonly (keyof Features)[] = [
  "archive",
  "completion",
  "abbrev",
  "scankb",
];

// where the scanning cursor sits: path of group indexes from the root,
// then an index into that level's children
export type ScanCursor = {
  path: number[];
  cursor: number;
  level_label: string;
  focused_label: string;
  focused_is_group: boolean;
};

export type LayoutLeaf = { label: string; action: Record<string, unknown> };
export type LayoutGroup = { label: string; children: LayoutNode[] };
export type LayoutNode = LayoutLeaf | LayoutGroup;

export function isGroup(node: LayoutNode): node is LayoutGroup {
  return Array.isArray((node as LayoutGroup).children);
}

export type StateMsg = {
  kind: "state";
  text: string;
  suggestions: string[];
  archive: string[];
  features: Features;
  scan?: ScanCursor; // absent while the scanning keyboard is disabled
  layout?: LayoutGroup; // only on the initial snapshot and get_state
  scan_period_ms?: number;
};

export type ScanStateMsg = { kind: "scan_state" } & ScanCursor;

export type AckMsg = { kind: "ack"; expanded: string; duration_ms: number };

export type ErrorMsg = { kind: "error"; detail: string };

export type ServerMsg = StateMsg | ScanStateMsg | AckMsg | ErrorMsg;

export type ClientMsg =
  | { kind: "type_text"; text: string }
  | { kind: "press_switch" }
  | { kind: "pick_suggestion"; index: number }
  | { kind: "pick_archive"; index: number }
  | { kind: "speak" }
  | { kind: "set_feature"; feature: keyof Features; on: boolean }
  | { kind: "define_abbrev"; abbr: string; expansion: string }
  | { kind: "get_state" };

const SERVER_KINDS = new Set(["state", "scan_state", "ack", "error"]);

export function parseServerMsg(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const kind = (doc as { kind?: unknown }).kind;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) return null;
  return doc as ServerMsg;
}
