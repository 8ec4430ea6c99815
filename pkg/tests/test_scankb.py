"""Scanning keyboard: layout parsing and the tick/press state machine."""

import json
import random

import pytest

from easyvoice.scankb import (Group, KeyAction, LayoutError, Leaf, ScanConfig,
                              ScanState, describe_cursor, focused_node,
                              initial_state, iter_leaves, layout_to_doc,
                              level_of, load_layout, press, tick)

ABC = load_layout(json.dumps({
    "label": "root",
    "children": [
        {"label": "A", "action": {"append": "a"}},
        {"label": "B", "action": {"append": "b"}},
        {"label": "C", "action": {"append": "c"}},
    ],
}))

NESTED = load_layout(json.dumps({
    "label": "root",
    "children": [
        {"label": "letters", "children": [
            {"label": "A", "action": {"append": "a"}},
            {"label": "vowels", "children": [
                {"label": "E", "action": {"append": "e"}},
                {"label": "I", "action": {"append": "i"}},
            ]},
        ]},
        {"label": "Space", "action": {"kind": "space"}},
    ],
}))

CFG = ScanConfig(scan_period_ms=1000, max_cycles=2)


# ----------------------------------------------------------------- layouts

def test_load_single_leaf_layout():
    root = load_layout('{"label":"root","children":[{"label":"a","action":{"append":"a"}}]}')
    assert isinstance(root, Group)
    assert len(root.children) == 1
    assert root.children[0] == Leaf("a", KeyAction("append", char="a"))


def test_empty_children_rejected():
    with pytest.raises(LayoutError):
        load_layout('{"label":"root","children":[]}')


def test_unknown_action_kind_rejected():
    with pytest.raises(LayoutError):
        load_layout('{"label":"r","children":[{"label":"x","action":{"kind":"explode"}}]}')


def test_non_tree_input_rejected():
    with pytest.raises(LayoutError):
        load_layout('[1,2,3]')
    with pytest.raises(LayoutError):
        load_layout('not json at all')
    with pytest.raises(LayoutError):
        load_layout('{"label":"r","children":[{"label":"both","action":{"kind":"space"},"children":[]}]}')


def test_root_must_be_group():
    with pytest.raises(LayoutError):
        load_layout('{"label":"lonely","action":{"kind":"space"}}')


def test_append_action_needs_single_char():
    with pytest.raises(LayoutError):
        KeyAction("append", char="ab")
    with pytest.raises(LayoutError):
        load_layout('{"label":"r","children":[{"label":"x","action":{"append":""}}]}')


def build_three_level_layout(n_leaves=30):
    """n_leaves split over groups of 5, each group holding 5 leaves/subgroups."""
    leaves = [{"label": f"k{i}", "action": {"append": chr(ord('a') + i % 26)}}
              for i in range(n_leaves)]
    mid = [{"label": f"g{j}", "children": leaves[j * 5:(j + 1) * 5]}
           for j in range(n_leaves // 5)]
    top = [{"label": "left", "children": mid[:3]},
           {"label": "right", "children": mid[3:]}]
    return {"label": "root", "children": top}


def count_leaves_independently(doc):
    """Tree walk written against the JSON, not the parsed types."""
    if "action" in doc:
        return 1
    return sum(count_leaves_independently(c) for c in doc["children"])


def test_30_key_nested_layout_leaf_count():
    doc = build_three_level_layout(30)
    root = load_layout(json.dumps(doc))
    assert sum(1 for _ in iter_leaves(root)) == count_leaves_independently(doc) == 30


def test_layout_doc_roundtrip():
    doc = build_three_level_layout(30)
    root = load_layout(json.dumps(doc))
    assert load_layout(json.dumps(layout_to_doc(root))) == root


# ------------------------------------------------------------------- ticks

def test_tick_advances_one_step():
    s = tick(ABC, initial_state(), CFG, 1000)
    assert (s.cursor, s.cycles, s.elapsed_ms) == (1, 0, 0)


def test_tick_wrap_increments_cycles():
    s = tick(ABC, ScanState(cursor=2), CFG, 1000)
    assert (s.cursor, s.cycles) == (0, 1)


def test_tick_accumulates_partial_periods():
    s = tick(ABC, initial_state(), CFG, 700)
    assert (s.cursor, s.elapsed_ms) == (0, 700)
    s = tick(ABC, s, CFG, 700)
    assert (s.cursor, s.elapsed_ms) == (1, 400)


def test_tick_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        tick(ABC, initial_state(), CFG, 0)


def test_subgroup_pops_to_parent_after_max_cycles():
    # focus the 2-child "vowels" group inside "letters"
    s = ScanState(path=(0, 1))
    # 2 children, max_cycles 2 -> after 4 periods the level has wrapped twice
    for _ in range(4):
        s = tick(NESTED, s, CFG, 1000)
    assert s.path == (0,)          # back on "letters"
    assert (s.cursor, s.cycles) == (0, 0)


def test_root_clamps_and_keeps_scanning():
    s = initial_state()
    for _ in range(30):
        s = tick(ABC, s, CFG, 1000)
    assert s.path == ()
    assert s.cycles == CFG.max_cycles
    s2 = tick(ABC, s, CFG, 1000)
    assert s2.cursor == (s.cursor + 1) % 3  # still moving


# ----------------------------------------------------------------- presses

def test_press_leaf_returns_action_and_resets():
    s = ScanState(cursor=2)
    s2, action = press(ABC, s)
    assert action == KeyAction("append", char="c")
    assert (s2.path, s2.cursor, s2.elapsed_ms, s2.cycles) == ((), 0, 0, 0)


def test_press_group_descends():
    s2, action = press(NESTED, initial_state())
    assert action is None
    assert s2.path == (0,)
    assert (s2.cursor, s2.elapsed_ms, s2.cycles) == (0, 0, 0)


def test_hand_traced_schedule_selects_c():
    # ticks arrive at t=1000 and t=2000; cursor walks A -> B -> C
    s = initial_state()
    s = tick(ABC, s, CFG, 1000)   # cursor on B
    s = tick(ABC, s, CFG, 1000)   # cursor on C
    s, action = press(ABC, s)
    assert action == KeyAction("append", char="c")


def test_press_resets_elapsed_mid_period():
    s = tick(ABC, initial_state(), CFG, 1500)
    assert s.elapsed_ms == 500
    s2, _ = press(ABC, s)
    assert s2.elapsed_ms == 0


# -------------------------------------------------- simulation oracle fuzz

class OracleScanner:
    """Step-by-step re-implementation advancing 1 ms at a time.

    Follows the stated rules directly: accumulate, advance on each full
    period, wrap bumps cycles, max_cycles pops (or clamps at root).
    """

    def __init__(self, doc, period, max_cycles):
        self.doc = doc
        self.period = period
        self.max_cycles = max_cycles
        self.path = []
        self.cursor = 0
        self.elapsed = 0
        self.cycles = 0

    def level(self):
        node = self.doc
        for i in self.path:
            node = node["children"][i]
        return node["children"]

    def tick(self, dt):
        for _ in range(dt):
            self.elapsed += 1
            if self.elapsed < self.period:
                continue
            self.elapsed = 0
            self.cursor += 1
            if self.cursor < len(self.level()):
                continue
            self.cursor = 0
            self.cycles += 1
            if self.cycles >= self.max_cycles:
                if self.path:
                    self.path.pop()
                    self.cursor = 0
                    self.cycles = 0
                else:
                    self.cycles = self.max_cycles

    def press(self):
        node = self.level()[self.cursor]
        descended = "children" in node
        if descended:
            self.path.append(self.cursor)
        self.cursor = 0
        self.elapsed = 0
        self.cycles = 0

    def state(self):
        return (tuple(self.path), self.cursor, self.elapsed, self.cycles)


def test_random_event_sequences_match_oracle_and_keep_invariants():
    rng = random.Random(2024)
    doc = build_three_level_layout(30)
    layout = load_layout(json.dumps(doc))
    for _round in range(20):
        period = rng.choice([50, 100, 250])
        cfg = ScanConfig(scan_period_ms=period, max_cycles=rng.choice([1, 2, 3]))
        oracle = OracleScanner(doc, period, cfg.max_cycles)
        s = initial_state()
        for _ in range(120):
            if rng.random() < 0.25:
                s, _action = press(layout, s)
                oracle.press()
            else:
                dt = rng.randint(1, period * 3)
                s = tick(layout, s, cfg, dt)
                oracle.tick(dt)
            assert (s.path, s.cursor, s.elapsed_ms, s.cycles) == oracle.state()
            # structural invariants
            level = level_of(layout, s)
            assert 0 <= s.cursor < len(level.children)
            node = layout
            for idx in s.path:
                node = node.children[idx]
                assert isinstance(node, Group)


def test_dwell_time_is_exactly_one_period_per_option():
    rng = random.Random(5)
    layout = load_layout(json.dumps(build_three_level_layout(30)))
    cfg = ScanConfig(scan_period_ms=400, max_cycles=3)
    level_size = len(layout.children)
    for k in range(1, level_size * cfg.max_cycles):
        s = initial_state()
        # deliver k periods in randomly sized chunks
        remaining = k * cfg.scan_period_ms
        while remaining:
            dt = min(remaining, rng.randint(1, 900))
            s = tick(layout, s, cfg, dt)
            remaining -= dt
        if s.cycles < cfg.max_cycles:
            assert s.cursor == k % level_size


def test_tick_additivity():
    rng = random.Random(6)
    layout = NESTED
    cfg = ScanConfig(scan_period_ms=300, max_cycles=2)
    for _ in range(200):
        s = initial_state()
        for _ in range(rng.randint(0, 5)):   # scramble into an arbitrary state
            s = tick(layout, s, cfg, rng.randint(1, 700))
        a, b = rng.randint(1, 650), rng.randint(1, 650)
        assert tick(layout, tick(layout, s, cfg, a), cfg, b) == tick(layout, s, cfg, a + b)


def test_every_leaf_reachable():
    """Constructively drive the cursor to each leaf and press it."""
    layout = load_layout(json.dumps(build_three_level_layout(30)))
    cfg = ScanConfig(scan_period_ms=100, max_cycles=5)

    def reach(path_indices):
        s = initial_state()
        collected = None
        for target in path_indices:
            for _ in range(target):    # one period per step from cursor 0
                s = tick(layout, s, cfg, cfg.scan_period_ms)
            s, collected = press(layout, s)
        return collected

    def walk(node, path):
        if isinstance(node, Leaf):
            action = reach(path)
            assert action == node.action, path
            return 1
        return sum(walk(c, path + [i]) for i, c in enumerate(node.children))

    assert walk(layout, []) == 30


def test_describe_and_focused_node_agree():
    s = ScanState(path=(0,), cursor=1)
    info = describe_cursor(NESTED, s)
    assert info == {"path": [0], "cursor": 1, "level_label": "letters",
                    "focused_label": "vowels", "focused_is_group": True}
    assert focused_node(NESTED, s).label == "vowels"
