"""Single-switch scanning, simulated: the cursor walks the keyboard on a
timer and one switch press selects whatever is highlighted.

Time here is fully simulated, so the trace below is deterministic.
"""

import json

from easyvoice.scankb import (ScanConfig, describe_cursor, initial_state,
                              load_layout, press, tick)

layout = load_layout(json.dumps({
    "label": "keyboard",
    "children": [
        {"label": "A-C", "children": [
            {"label": "A", "action": {"append": "a"}},
            {"label": "B", "action": {"append": "b"}},
            {"label": "C", "action": {"append": "c"}},
        ]},
        {"label": "D-F", "children": [
            {"label": "D", "action": {"append": "d"}},
            {"label": "E", "action": {"append": "e"}},
            {"label": "F", "action": {"append": "f"}},
        ]},
        {"label": "Space", "action": {"kind": "space"}},
    ],
}))
config = ScanConfig(scan_period_ms=1000, max_cycles=2)

state = initial_state()
clock_ms = 0
typed = []


def show(event):
    cur = describe_cursor(layout, state)
    print(f"t={clock_ms:5d} ms  {event:12} cursor on {cur['focused_label']!r}"
          f" in {cur['level_label']!r}")


def wait(ms):
    global state, clock_ms
    state = tick(layout, state, config, ms)
    clock_ms += ms
    show(f"wait {ms}")


def hit_switch():
    global state
    action = None
    state, action = press(layout, state)
    show("press")
    if action and action.kind == "append":
        typed.append(action.char)
    elif action and action.kind == "space":
        typed.append(" ")


# goal: type "fa ". watch the cursor, press at the right moments.
show("start")
wait(1000)          # cursor moves to D-F
hit_switch()        # enter the D-F group; cursor restarts on D
wait(2000)          # two steps: D -> E -> F
hit_switch()        # selects f, scanning restarts at this level

print()
print("after two idle cycles a group pops back out on its own:")
wait(6000)          # 2 cycles x 3 options x 1000 ms, no press
hit_switch()        # back at the top level: enter A-C
hit_switch()        # cursor starts on A: selects a
wait(6000)          # idle again, pop back to the top
wait(2000)          # A-C -> D-F -> Space
hit_switch()        # space

print()
print(f"typed: {''.join(typed)!r}")
