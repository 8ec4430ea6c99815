"""Record a real composer session for the UI tests.

The UI is a pure mirror, so its tests replay genuine service output rather
than hand-written fixtures. Regenerate after protocol changes with:

    python3 record_transcript.py > test/transcripts/session1.json

(needs the easyvoice package importable, e.g. pip install -e ..)
"""

import json
import sys

from easyvoice.service import AppConfig, build_composer

composer = build_composer(AppConfig(scan_period_ms=500), speaker=lambda buf: None)

recorded = [composer.snapshot(include_layout=True)]  # what /ws sends on accept


def play(msg):
    recorded.extend(composer.handle_message(msg))


def tick(ms):
    recorded.extend(composer.tick_scanner(ms))


tick(500)
tick(500)
play({"kind": "type_text", "text": "th"})
play({"kind": "pick_suggestion", "index": 0})
play({"kind": "type_text", "text": "btw"})
play({"kind": "speak"})
play({"kind": "press_switch"})
tick(500)
play({"kind": "press_switch"})
play({"kind": "set_feature", "feature": "completion", "on": False})
play({"kind": "type_text", "text": "th"})
play({"kind": "set_feature", "feature": "completion", "on": True})
play({"kind": "set_feature", "feature": "scankb", "on": False})
play({"kind": "set_feature", "feature": "scankb", "on": True})
play({"kind": "balderdash"})
play({"kind": "pick_archive", "index": 0})
play({"kind": "get_state"})

json.dump(recorded, sys.stdout, indent=1)
sys.stdout.write("\n")
