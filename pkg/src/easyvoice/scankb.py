"""Single-switch scanning keyboard.

A timer walks a cursor over the options of the current level; one switch
press selects. Groups nest: selecting a group focuses its children.
All transitions are pure functions of (layout, state, dt or press), so the
whole machine runs on simulated time and is testable without a clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Union


class LayoutError(ValueError):
    pass


# Feature ids a ToggleFeature action may name.
TOGGLEABLE_FEATURES = ("archive", "completion", "abbrev", "scankb")


@dataclass(frozen=True)
class KeyAction:
    """What a leaf does when selected.

    kind: "append" | "backspace" | "space" | "speak" | "toggle"
    ``char`` is set for append (exactly one character), ``feature`` for toggle.
    """

    kind: str
    char: str = ""
    feature: str = ""

    def __post_init__(self):
        if self.kind == "append":
            if len(self.char) != 1:
                raise LayoutError(f"append action needs exactly one character, got {self.char!r}")
        elif self.kind == "toggle":
            if self.feature not in TOGGLEABLE_FEATURES:
                raise LayoutError(f"unknown feature for toggle: {self.feature!r}")
        elif self.kind not in ("backspace", "space", "speak"):
            raise LayoutError(f"unknown action kind: {self.kind!r}")


@dataclass(frozen=True)
class Leaf:
    label: str
    action: KeyAction


@dataclass(frozen=True)
class Group:
    label: str
    children: tuple["ScanNode", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise LayoutError(f"group {self.label!r} has no children")


ScanNode = Union[Leaf, Group]


def _parse_action(doc) -> KeyAction:
    if not isinstance(doc, dict):
        raise LayoutError(f"action must be an object, got {type(doc).__name__}")
    if "append" in doc:
        char = doc["append"]
        if not isinstance(char, str):
            raise LayoutError("append value must be a string")
        return KeyAction("append", char=char)
    kind = doc.get("kind")
    if kind == "toggle":
        return KeyAction("toggle", feature=doc.get("feature", ""))
    if isinstance(kind, str):
        return KeyAction(kind)
    raise LayoutError(f"cannot parse action: {doc!r}")


def _parse_node(doc, depth: int = 0) -> ScanNode:
    if depth > 32:
        raise LayoutError("layout nested deeper than 32 levels")
    if not isinstance(doc, dict):
        raise LayoutError(f"node must be an object, got {type(doc).__name__}")
    label = doc.get("label")
    if not isinstance(label, str) or not label:
        raise LayoutError(f"node missing a non-empty label: {doc!r}")
    has_children = "children" in doc
    has_action = "action" in doc
    if has_children == has_action:
        raise LayoutError(f"node {label!r} must have exactly one of 'children' or 'action'")
    if has_action:
        return Leaf(label, _parse_action(doc["action"]))
    children = doc["children"]
    if not isinstance(children, list) or not children:
        raise LayoutError(f"group {label!r} needs a non-empty children list")
    return Group(label, tuple(_parse_node(c, depth + 1) for c in children))


def load_layout(document: str) -> Group:
    """Parse a JSON layout document into a validated tree.

    Groups are ``{"label":.., "children":[...]}``; leaves are
    ``{"label":.., "action": {...}}``. The root must be a group.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise LayoutError(f"layout is not valid JSON: {e}") from None
    root = _parse_node(doc)
    if not isinstance(root, Group):
        raise LayoutError("root of a layout must be a group")
    return root


def iter_leaves(node: ScanNode):
    if isinstance(node, Leaf):
        yield node
    else:
        for child in node.children:
            yield from iter_leaves(child)


@dataclass(frozen=True)
class ScanConfig:
    scan_period_ms: int = 1000
    max_cycles: int = 2

    def __post_init__(self):
        if self.scan_period_ms < 50:
            raise ValueError(f"scan_period_ms must be >= 50, got {self.scan_period_ms}")
        if self.max_cycles < 1:
            raise ValueError(f"max_cycles must be >= 1, got {self.max_cycles}")


@dataclass(frozen=True)
class ScanState:
    """Cursor position in the tree.

    path: child indices from the root naming the focused group
    (empty = scanning the root's children). cursor indexes the focused
    group's children. elapsed_ms is time since the cursor last moved;
    cycles counts completed full wraps at this level.
    """

    path: tuple[int, ...] = ()
    cursor: int = 0
    elapsed_ms: int = 0
    cycles: int = 0


def initial_state() -> ScanState:
    return ScanState()


def level_of(layout: Group, state: ScanState) -> Group:
    """The group whose children the cursor is scanning."""
    node: ScanNode = layout
    for i in state.path:
        if not isinstance(node, Group) or not 0 <= i < len(node.children):
            raise LayoutError(f"state path {state.path} does not fit layout")
        node = node.children[i]
    if not isinstance(node, Group):
        raise LayoutError(f"state path {state.path} lands on a leaf")
    return node


def focused_node(layout: Group, state: ScanState) -> ScanNode:
    level = level_of(layout, state)
    if not 0 <= state.cursor < len(level.children):
        raise LayoutError(f"cursor {state.cursor} out of range for {level.label!r}")
    return level.children[state.cursor]


def tick(layout: Group, state: ScanState, config: ScanConfig, dt_ms: int) -> ScanState:
    """Advance simulated time by dt_ms.

    Every full scan_period the cursor moves one step (mod level size);
    wrapping increments cycles. A level that wraps max_cycles times without
    a press pops to its parent (fresh cursor), except the root, which clamps
    the counter and keeps scanning.
    """
    if dt_ms <= 0:
        raise ValueError(f"dt_ms must be positive, got {dt_ms}")
    path, cursor = state.path, state.cursor
    elapsed = state.elapsed_ms + dt_ms
    cycles = state.cycles
    size = len(level_of(layout, state).children)
    while elapsed >= config.scan_period_ms:
        elapsed -= config.scan_period_ms
        cursor += 1
        if cursor == size:
            cursor = 0
            cycles += 1
            if cycles >= config.max_cycles:
                if path:
                    # give up on this level: hand the cursor back to the parent
                    path = path[:-1]
                    size = len(level_of(layout, ScanState(path)).children)
                    cycles = 0
                else:
                    cycles = config.max_cycles  # root never pops; counter just clamps
    return ScanState(path, cursor, elapsed, cycles)


def press(layout: Group, state: ScanState) -> tuple[ScanState, Optional[KeyAction]]:
    """Select whatever the cursor is on.

    A leaf yields its action and restarts scanning at this level; a group
    becomes the focused level immediately.
    """
    node = focused_node(layout, state)
    if isinstance(node, Leaf):
        return ScanState(path=state.path), node.action
    return ScanState(path=state.path + (state.cursor,)), None


def describe_cursor(layout: Group, state: ScanState) -> dict:
    """Rendering-friendly snapshot: where the cursor is and what it is on."""
    level = level_of(layout, state)
    node = level.children[state.cursor]
    return {
        "path": list(state.path),
        "cursor": state.cursor,
        "level_label": level.label,
        "focused_label": node.label,
        "focused_is_group": isinstance(node, Group),
    }


def layout_to_doc(node: ScanNode) -> dict:
    """Inverse of load_layout's parse, for shipping layouts to clients."""
    if isinstance(node, Leaf):
        a = node.action
        if a.kind == "append":
            action = {"append": a.char}
        elif a.kind == "toggle":
            action = {"kind": "toggle", "feature": a.feature}
        else:
            action = {"kind": a.kind}
        return {"label": node.label, "action": action}
    return {"label": node.label, "children": [layout_to_doc(c) for c in node.children]}
