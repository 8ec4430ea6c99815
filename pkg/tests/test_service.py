"""Control plane: config, the composer session, the speak pipeline, gating."""

import json
import os
import random
import string

import numpy as np
import pytest

from easyvoice.scankb import ScanConfig, initial_state, load_layout
from easyvoice.scankb import press as scan_press
from easyvoice.service import (AppConfig, Composer, ConfigError, FeatureFlags,
                               build_composer, build_synthesizer, check_config,
                               current_prefix, handle_client_message,
                               load_config_file, parse_peer)
from easyvoice.speech import AudioBuffer, SynthesisError, synthesize_tone
from easyvoice.textaccel import load_abbreviations, load_dictionary


def flat_layout(keys="abc", with_speak=False):
    children = [{"label": k.upper(), "action": {"append": k}} for k in keys]
    if with_speak:
        children.append({"label": "Speak", "action": {"kind": "speak"}})
    return load_layout(json.dumps({"label": "root", "children": children}))


def make_composer(**overrides):
    kwargs = dict(
        dictionary=load_dictionary(["the\t100", "this\t50", "thing\t10", "cat\t70"]),
        abbreviations=load_abbreviations(["btw\tby the way"]),
        layout=flat_layout(),
        scan_config=ScanConfig(scan_period_ms=1000, max_cycles=2),
    )
    kwargs.update(overrides)
    spoken = []
    kwargs.setdefault("speaker", spoken.append)
    composer = Composer(**kwargs)
    return composer, spoken


def replies_of_kind(replies, kind):
    return [r for r in replies if r["kind"] == kind]


# ------------------------------------------------------------------- config

def test_parse_peer():
    assert parse_peer("127.0.0.1:4000") == ("127.0.0.1", 4000)
    assert parse_peer("example.org:53") == ("example.org", 53)
    for bad in ("nohost", ":4000", "host:", "host:x", "host:0", "host:70000"):
        with pytest.raises(ConfigError):
            parse_peer(bad)


def test_appconfig_validation():
    with pytest.raises(ConfigError):
        AppConfig(ui_port=0)
    with pytest.raises(ConfigError):
        AppConfig(scan_period_ms=10)
    with pytest.raises(ConfigError):
        AppConfig(synth="sapi5")
    assert AppConfig(synth="cmd:say {text} -o {out}").synth.startswith("cmd:")


def test_load_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "peer": "10.0.0.5:4242",
        "scan_period_ms": 500,
        "features": {"completion": False},
    }))
    cfg = load_config_file(str(path))
    assert cfg.peer == ("10.0.0.5", 4242)
    assert cfg.scan_period_ms == 500
    assert not cfg.features.completion_on
    assert cfg.features.archive_on  # untouched flags keep defaults


def test_load_config_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"speed": 11}')
    with pytest.raises(ConfigError):
        load_config_file(str(path))


def test_check_config_passes_on_packaged_defaults():
    assert check_config(AppConfig()) == []


def test_check_config_names_missing_dictionary(tmp_path):
    cfg = AppConfig(dict_path=str(tmp_path / "absent.tsv"))
    problems = check_config(cfg)
    assert len(problems) == 1
    assert "absent.tsv" in problems[0]


def test_check_config_ignores_files_of_disabled_features(tmp_path):
    cfg = AppConfig(dict_path=str(tmp_path / "absent.tsv"),
                    features=FeatureFlags(completion_on=False))
    assert check_config(cfg) == []


def test_check_config_catches_malformed_layout(tmp_path):
    layout = tmp_path / "layout.json"
    layout.write_text('{"label": "root", "children": []}')
    problems = check_config(AppConfig(layout_path=str(layout)))
    assert len(problems) == 1 and "layout" in problems[0]


def test_build_synthesizer_choices():
    tone = build_synthesizer("tone")
    assert tone("ab").same_audio(synthesize_tone("ab"))
    with pytest.raises(ConfigError):
        build_synthesizer("festival")


def test_current_prefix():
    assert current_prefix("hello th") == "th"
    assert current_prefix("hello ") == ""
    assert current_prefix("") == ""
    assert current_prefix("don'") == "don'"
    assert current_prefix("a-b") == "b"


# ----------------------------------------------------------------- protocol

def test_type_text_returns_th_suggestions():
    composer = build_composer(AppConfig())  # packaged sample dictionary
    replies = composer.handle_message({"kind": "type_text", "text": "th"})
    suggestions = replies_of_kind(replies, "state")[0]["suggestions"]
    assert 0 < len(suggestions) <= 8
    assert all(w.lower().startswith("th") for w in suggestions)


def test_completion_off_yields_empty_suggestions():
    composer = build_composer(AppConfig())
    composer.handle_message({"kind": "set_feature", "feature": "completion", "on": False})
    replies = composer.handle_message({"kind": "type_text", "text": "th"})
    assert replies_of_kind(replies, "state")[0]["suggestions"] == []


def test_double_press_matches_scankb_simulation():
    layout_doc = {"label": "root", "children": [
        {"label": "G1", "children": [
            {"label": "A", "action": {"append": "a"}},
            {"label": "B", "action": {"append": "b"}},
        ]},
        {"label": "C", "action": {"append": "c"}},
        {"label": "D", "action": {"append": "d"}},
    ]}
    layout = load_layout(json.dumps(layout_doc))
    composer, _ = make_composer(layout=layout)

    # oracle: run the same two presses through scankb directly
    s, first_action = scan_press(layout, initial_state())
    s, second_action = scan_press(layout, s)
    assert first_action is None and second_action.char == "a"

    composer.handle_message({"kind": "press_switch"})
    replies = composer.handle_message({"kind": "press_switch"})
    assert composer.text == "a"     # child 0 of whatever the first press focused
    scan = replies_of_kind(replies, "scan_state")[0]
    assert (tuple(scan["path"]), scan["cursor"]) == (s.path, s.cursor)


def test_unknown_kind_is_error_and_state_unchanged():
    composer, spoken = make_composer()
    composer.handle_message({"kind": "type_text", "text": "keep me"})
    before = composer.snapshot(include_layout=True)
    for msg in ({"kind": "warp"}, {"kind": 7}, "not a dict", None,
                {"no_kind": True}, {"kind": "type_text", "text": 5},
                {"kind": "pick_suggestion", "index": "x"},
                {"kind": "pick_archive", "index": 99},
                {"kind": "set_feature", "feature": "completion", "on": "yes"},
                {"kind": "define_abbrev", "abbr": "a b", "expansion": "c"}):
        replies = composer.handle_message(msg)
        assert replies_of_kind(replies, "error"), msg
        assert composer.snapshot(include_layout=True) == before, msg
    assert not spoken


def test_protocol_fuzz_never_raises():
    rng = random.Random(13)
    composer, _ = make_composer()
    kinds = list(("type_text", "press_switch", "pick_suggestion", "pick_archive",
                  "speak", "set_feature", "define_abbrev", "get_state", "bogus"))
    for _ in range(400):
        msg = {"kind": rng.choice(kinds)}
        for key in ("text", "index", "feature", "on", "abbr", "expansion"):
            if rng.random() < 0.4:
                msg[key] = rng.choice([None, -1, 0, 3, "x", "", True, [1], {"a": 1},
                                       "".join(rng.choice(string.printable)
                                               for _ in range(rng.randint(0, 6)))])
        replies = composer.handle_message(msg)
        assert isinstance(replies, list)
        for r in replies:
            assert "kind" in r


def test_pick_suggestion_replaces_prefix():
    composer = build_composer(AppConfig())
    composer.handle_message({"kind": "type_text", "text": "hello th"})
    options = composer.suggestions()
    replies = composer.handle_message({"kind": "pick_suggestion", "index": 1})
    state = replies_of_kind(replies, "state")[0]
    assert state["text"] == f"hello {options[1]} "


def test_pick_suggestion_empty_prefix_appends_word():
    composer = build_composer(AppConfig())
    composer.handle_message({"kind": "type_text", "text": "go "})
    options = composer.suggestions()
    composer.handle_message({"kind": "pick_suggestion", "index": 0})
    assert composer.text == f"go {options[0]} "


def test_pick_archive_loads_message_into_buffer():
    composer, _ = make_composer()
    composer.handle_message({"kind": "speak", "text": "first message"})
    composer.handle_message({"kind": "speak", "text": "second message"})
    replies = composer.handle_message({"kind": "pick_archive", "index": 1})
    state = replies_of_kind(replies, "state")[0]
    assert state["text"] == "first message"
    assert state["archive"][0] == "first message"  # picked moves to front


def test_define_abbrev_used_by_later_speak():
    composer, spoken = make_composer()
    composer.handle_message({"kind": "define_abbrev", "abbr": "gm", "expansion": "good morning"})
    replies = composer.handle_message({"kind": "speak", "text": "gm"})
    assert replies_of_kind(replies, "ack")[0]["expanded"] == "good morning"


def test_define_abbrev_persists_when_path_set(tmp_path):
    path = str(tmp_path / "abbrev.tsv")
    with open(path, "w") as f:
        f.write("btw\tby the way\n")
    composer, _ = make_composer(abbreviations=load_abbreviations(["btw\tby the way"]),
                                abbrev_path=path)
    composer.handle_message({"kind": "define_abbrev", "abbr": "np", "expansion": "no problem"})
    with open(path) as f:
        table = load_abbreviations(f)
    assert table.lookup("np") == "no problem"
    assert table.lookup("btw") == "by the way"


def test_get_state_includes_layout_and_period():
    composer, _ = make_composer()
    (reply,) = composer.handle_message({"kind": "get_state"})
    assert reply["kind"] == "state"
    assert reply["layout"]["label"] == "root"
    assert reply["scan_period_ms"] == 1000


# -------------------------------------------------------------------- speak

def test_speak_btw_expands_and_streams_by_the_way():
    composer, spoken = make_composer()
    replies = composer.handle_message({"kind": "speak", "text": "btw"})
    ack = replies_of_kind(replies, "ack")[0]
    assert ack["expanded"] == "by the way"
    assert len(spoken) == 1
    assert spoken[0].same_audio(synthesize_tone("by the way"))


def test_speak_empty_rejected_no_packets():
    composer, spoken = make_composer()
    replies = composer.handle_message({"kind": "speak", "text": "   "})
    assert replies_of_kind(replies, "error")
    assert spoken == []


def test_speak_hi_duration_and_packet_math():
    composer, spoken = make_composer()
    replies = composer.handle_message({"kind": "speak", "text": "hi"})
    ack = replies_of_kind(replies, "ack")[0]
    assert ack["duration_ms"] == 160
    assert len(spoken[0]) == 1280  # 8 full packets of 160 samples

    from easyvoice.voipbridge import begin_stream, new_session, packetize
    session = begin_stream(new_session(("127.0.0.1", 1), ssrc=1, sequence=0, timestamp=0))
    _, packets = packetize(session, spoken[0])
    assert len(packets) == 8


def test_speak_uses_buffer_when_no_text_given():
    composer, spoken = make_composer()
    composer.handle_message({"kind": "type_text", "text": "cat"})
    replies = composer.handle_message({"kind": "speak"})
    assert replies_of_kind(replies, "ack")[0]["expanded"] == "cat"
    assert composer.text == ""  # buffer cleared on success


def test_speak_archives_original_not_expansion():
    composer, _ = make_composer()
    composer.handle_message({"kind": "speak", "text": "btw"})
    assert composer.archive.messages == ("btw",)


def test_speak_failure_preserves_typed_text():
    def broken(text):
        raise SynthesisError("engine fell over")

    composer, spoken = make_composer(synthesizer=broken)
    composer.handle_message({"kind": "type_text", "text": "precious words"})
    replies = composer.handle_message({"kind": "speak"})
    errors = replies_of_kind(replies, "error")
    assert errors and "engine fell over" in errors[0]["detail"]
    assert composer.text == "precious words"
    assert spoken == [] and len(composer.archive) == 0


def test_speak_without_session_is_error():
    composer = Composer(dictionary=load_dictionary([]),
                        abbreviations=load_abbreviations([]),
                        layout=flat_layout(), speaker=None)
    replies = composer.handle_message({"kind": "speak", "text": "hi"})
    assert "no call session" in replies_of_kind(replies, "error")[0]["detail"]


def test_speak_resamples_external_rates(tmp_path):
    composer, spoken = make_composer(
        synthesizer=lambda text: AudioBuffer(16000, np.ones(1600, np.int16)))
    composer.handle_message({"kind": "speak", "text": "x"})
    assert spoken[0].sample_rate_hz == 8000
    assert len(spoken[0]) == 800


def test_speak_persists_archive(tmp_path):
    path = str(tmp_path / "archive.json")
    composer, _ = make_composer(archive_path=path)
    composer.handle_message({"kind": "speak", "text": "hello there"})
    with open(path) as f:
        assert json.load(f) == {"messages": ["hello there"]}


def test_press_switch_on_speak_leaf_runs_pipeline():
    composer, spoken = make_composer(layout=flat_layout("a", with_speak=True))
    composer.handle_message({"kind": "press_switch"})       # appends 'a'
    # move cursor to the Speak leaf (index 1) then press
    composer.tick_scanner(1000)
    replies = composer.handle_message({"kind": "press_switch"})
    assert replies_of_kind(replies, "ack")[0]["expanded"] == "a"
    assert len(spoken) == 1
    assert composer.text == ""


# ------------------------------------------------------------------- ticks

def test_tick_moves_cursor_one_step():
    composer, _ = make_composer()
    (msg,) = composer.tick_scanner(1000)
    assert msg["kind"] == "scan_state"
    assert msg["cursor"] == 1


def test_tick_disabled_is_silent_noop():
    composer, _ = make_composer(features=FeatureFlags(scankb_on=False))
    assert composer.tick_scanner(1000) == []


def test_tick_triple_period_advances_three():
    composer, _ = make_composer()  # 3-key layout
    (msg,) = composer.tick_scanner(3000)
    assert msg["cursor"] == 0  # 3 mod 3, one full cycle
    (msg,) = composer.tick_scanner(1000)
    assert msg["cursor"] == 1


# ------------------------------------------------------------------ gating

def test_gating_archive_off_no_archive_writes(tmp_path):
    path = str(tmp_path / "archive.json")
    composer, spoken = make_composer(features=FeatureFlags(archive_on=False),
                                     archive_path=path)
    replies = composer.handle_message({"kind": "speak", "text": "quiet"})
    assert replies_of_kind(replies, "ack")  # speaking still works
    assert len(composer.archive) == 0
    assert not os.path.exists(path)
    assert replies_of_kind(replies, "state")[0]["archive"] == []
    assert replies_of_kind(composer.handle_message({"kind": "pick_archive", "index": 0}),
                           "error")


def test_gating_abbrev_off_speaks_literal_text():
    composer, spoken = make_composer(features=FeatureFlags(abbrev_on=False))
    replies = composer.handle_message({"kind": "speak", "text": "btw"})
    assert replies_of_kind(replies, "ack")[0]["expanded"] == "btw"
    assert spoken[0].same_audio(synthesize_tone("btw"))


def test_gating_scankb_off_blocks_scan_paths():
    composer, _ = make_composer(features=FeatureFlags(scankb_on=False))
    assert composer.tick_scanner(5000) == []
    replies = composer.handle_message({"kind": "press_switch"})
    assert replies_of_kind(replies, "error")
    assert "scan" not in composer.snapshot()


def test_gating_completion_off_blocks_picking():
    composer, _ = make_composer(features=FeatureFlags(completion_on=False))
    composer.handle_message({"kind": "type_text", "text": "th"})
    replies = composer.handle_message({"kind": "pick_suggestion", "index": 0})
    assert replies_of_kind(replies, "error")
    assert composer.text == "th"


def test_toggle_key_action_flips_feature():
    layout = load_layout(json.dumps({"label": "root", "children": [
        {"label": "NoComplete", "action": {"kind": "toggle", "feature": "completion"}}]}))
    composer, _ = make_composer(layout=layout)
    assert composer.features.completion_on
    composer.handle_message({"kind": "press_switch"})
    assert not composer.features.completion_on
    composer.handle_message({"kind": "press_switch"})
    assert composer.features.completion_on


def test_functional_wrapper_shape():
    composer, _ = make_composer()
    same, replies = handle_client_message(composer, {"kind": "get_state"})
    assert same is composer and replies[0]["kind"] == "state"
