"""Control plane: configuration, the composer session, and the JSON
message protocol the UI speaks.

The composer owns all typing/scanning state and is driven from exactly one
logical loop (the WebSocket server's session task, or a test calling it
directly). Speech synthesis is split into prepare/commit phases so a slow
external engine can run in a worker without stalling scanner ticks.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Optional

from . import scankb, textaccel
from .speech import (AudioBuffer, ExternalSynthCommand, SynthesisError,
                     ToneSynthConfig, resample_linear, synthesize_external,
                     synthesize_tone)
from .voipbridge import TELEPHONY_RATE


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureFlags:
    archive_on: bool = True
    completion_on: bool = True
    abbrev_on: bool = True
    scankb_on: bool = True

    def with_feature(self, feature: str, on: bool) -> "FeatureFlags":
        key = f"{feature}_on"
        if not hasattr(self, key):
            raise ValueError(f"unknown feature: {feature!r}")
        return replace(self, **{key: on})

    def is_on(self, feature: str) -> bool:
        return getattr(self, f"{feature}_on")

    def as_dict(self) -> dict:
        return {"archive": self.archive_on, "completion": self.completion_on,
                "abbrev": self.abbrev_on, "scankb": self.scankb_on}


@dataclass(frozen=True)
class AppConfig:
    peer: Optional[tuple[str, int]] = None
    listen_port: int = 4000
    ui_port: int = 8080
    dict_path: Optional[str] = None
    abbrev_path: Optional[str] = None
    layout_path: Optional[str] = None
    archive_path: Optional[str] = None
    scan_period_ms: int = 1000
    synth: str = "tone"
    features: FeatureFlags = field(default_factory=FeatureFlags)

    def __post_init__(self):
        for name, port in (("listen_port", self.listen_port), ("ui_port", self.ui_port)):
            if not 1 <= port <= 65535:
                raise ConfigError(f"{name} must be in [1, 65535], got {port}")
        if self.scan_period_ms < 50:
            raise ConfigError(f"scan_period_ms must be >= 50, got {self.scan_period_ms}")
        if not (self.synth == "tone" or self.synth.startswith("cmd:")):
            raise ConfigError(f"synth must be 'tone' or 'cmd:<template>', got {self.synth!r}")


def parse_peer(text: str) -> tuple[str, int]:
    host, sep, port_text = text.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"peer must be host:port, got {text!r}")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"peer port is not a number: {port_text!r}") from None
    if not 1 <= port <= 65535:
        raise ConfigError(f"peer port out of range: {port}")
    return host, port


_CONFIG_KEYS = {"peer", "listen_port", "ui_port", "dict_path", "abbrev_path",
                "layout_path", "archive_path", "scan_period_ms", "synth", "features"}


def load_config_file(path: str) -> AppConfig:
    """One JSON document holding AppConfig fields; peer as \"host:port\"."""
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config {path} has unknown keys: {sorted(unknown)}")
    kwargs = dict(doc)
    if "peer" in kwargs and kwargs["peer"] is not None:
        kwargs["peer"] = parse_peer(kwargs["peer"])
    if "features" in kwargs:
        feats = kwargs["features"]
        if not isinstance(feats, dict):
            raise ConfigError("config 'features' must be an object of booleans")
        try:
            kwargs["features"] = FeatureFlags(**{f"{k}_on" if not k.endswith("_on") else k: bool(v)
                                                 for k, v in feats.items()})
        except TypeError as e:
            raise ConfigError(f"bad feature flags: {e}") from None
    try:
        return AppConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(f"bad config {path}: {e}") from None


def _packaged(name: str) -> str:
    return resources.files("easyvoice").joinpath("data", name).read_text(encoding="utf-8")


def load_dictionary_for(config: AppConfig) -> textaccel.FrequencyDictionary:
    if config.dict_path:
        with open(config.dict_path, encoding="utf-8") as f:
            return textaccel.load_dictionary(f)
    return textaccel.load_dictionary(_packaged("sample_dict.tsv").splitlines())


def load_abbreviations_for(config: AppConfig) -> textaccel.AbbreviationTable:
    if config.abbrev_path:
        with open(config.abbrev_path, encoding="utf-8") as f:
            return textaccel.load_abbreviations(f)
    return textaccel.load_abbreviations(_packaged("sample_abbrev.tsv").splitlines())


def load_layout_for(config: AppConfig) -> scankb.Group:
    if config.layout_path:
        with open(config.layout_path, encoding="utf-8") as f:
            return scankb.load_layout(f.read())
    return scankb.load_layout(_packaged("default_layout.json"))


def check_config(config: AppConfig) -> list[str]:
    """Validate that every enabled feature can actually start.

    Returns human-readable problems (empty = good). Files are parsed, not
    just stat'ed, so a malformed dictionary fails here instead of mid-call.
    """
    problems: list[str] = []
    checks = [
        ("completion", "dictionary", config.dict_path, load_dictionary_for),
        ("abbrev", "abbreviations", config.abbrev_path, load_abbreviations_for),
        ("scankb", "layout", config.layout_path, load_layout_for),
    ]
    for feature, what, path, loader in checks:
        if not config.features.is_on(feature):
            continue
        try:
            loader(config)
        except (OSError, ValueError) as e:
            problems.append(f"{what} file {path or '(packaged default)'}: {e}")
    if config.features.archive_on and config.archive_path:
        try:
            textaccel.load_archive(config.archive_path)
        except (OSError, ValueError) as e:
            problems.append(f"archive file {config.archive_path}: {e}")
    return problems


def build_synthesizer(choice: str) -> Callable[[str], AudioBuffer]:
    """Map the synth config string to a text -> AudioBuffer callable."""
    if choice == "tone":
        cfg = ToneSynthConfig()
        return lambda text: synthesize_tone(text, cfg)
    if choice.startswith("cmd:"):
        cmd = ExternalSynthCommand(choice[4:])
        return lambda text: synthesize_external(cmd, text)
    raise ConfigError(f"unknown synth choice: {choice!r}")


CLIENT_KINDS = ("type_text", "press_switch", "pick_suggestion", "pick_archive",
                "speak", "set_feature", "define_abbrev", "get_state")

_PREFIX_RE = re.compile(r"[\w']*$")


def current_prefix(text: str) -> str:
    """The word being typed: the trailing run of word characters."""
    return _PREFIX_RE.search(text).group(0)


@dataclass
class PendingSpeak:
    original: str
    expanded: str


class Composer:
    """Single-user session state: input buffer, suggestions, archive,
    scanner, feature flags, and the hookup to synthesis and the stream."""

    def __init__(self, *,
                 dictionary: textaccel.FrequencyDictionary,
                 abbreviations: textaccel.AbbreviationTable,
                 layout: scankb.Group,
                 scan_config: scankb.ScanConfig = scankb.ScanConfig(),
                 features: FeatureFlags = FeatureFlags(),
                 archive: textaccel.MessageArchive = textaccel.MessageArchive(),
                 synthesizer: Optional[Callable[[str], AudioBuffer]] = None,
                 speaker: Optional[Callable[[AudioBuffer], None]] = None,
                 archive_path: Optional[str] = None,
                 abbrev_path: Optional[str] = None):
        self.text = ""
        self.dictionary = dictionary
        self.abbreviations = abbreviations
        self.layout = layout
        self.scan_config = scan_config
        self.scan_state = scankb.initial_state()
        self.features = features
        self.archive = archive
        self.synthesizer = synthesizer or build_synthesizer("tone")
        self.speaker = speaker
        self.archive_path = archive_path
        self.abbrev_path = abbrev_path
        self.pending_speak: Optional[PendingSpeak] = None

    # ------------------------------------------------------------ snapshots

    def suggestions(self) -> list[str]:
        if not self.features.completion_on:
            return []
        return self.dictionary.complete(current_prefix(self.text))

    def snapshot(self, include_layout: bool = False) -> dict:
        snap = {
            "kind": "state",
            "text": self.text,
            "suggestions": self.suggestions(),
            "archive": list(self.archive.messages) if self.features.archive_on else [],
            "features": self.features.as_dict(),
        }
        if self.features.scankb_on:
            snap["scan"] = scankb.describe_cursor(self.layout, self.scan_state)
        if include_layout:
            snap["layout"] = scankb.layout_to_doc(self.layout)
            snap["scan_period_ms"] = self.scan_config.scan_period_ms
        return snap

    def _scan_message(self) -> dict:
        return {"kind": "scan_state",
                **scankb.describe_cursor(self.layout, self.scan_state)}

    @staticmethod
    def _error(detail: str) -> dict:
        return {"kind": "error", "detail": detail}

    # ----------------------------------------------------------- the clock

    def tick_scanner(self, dt_ms: int) -> list[dict]:
        """Advance scanning time; silently a no-op when the feature is off."""
        if not self.features.scankb_on or dt_ms <= 0:
            return []
        self.scan_state = scankb.tick(self.layout, self.scan_state, self.scan_config, dt_ms)
        return [self._scan_message()]

    # ------------------------------------------------------------- actions

    def _set_text(self, text: str) -> None:
        self.text = text

    def _apply_key_action(self, action: scankb.KeyAction) -> list[dict]:
        if action.kind == "append":
            self._set_text(self.text + action.char)
        elif action.kind == "backspace":
            self._set_text(self.text[:-1])
        elif action.kind == "space":
            self._set_text(self.text + " ")
        elif action.kind == "speak":
            return self._request_speak(self.text)
        elif action.kind == "toggle":
            return self._set_feature(action.feature, not self.features.is_on(action.feature))
        return [self.snapshot()]

    def _set_feature(self, feature: str, on: bool) -> list[dict]:
        try:
            self.features = self.features.with_feature(feature, on)
        except ValueError as e:
            return [self._error(str(e))]
        if feature == "scankb" and on:
            self.scan_state = scankb.initial_state()
        return [self.snapshot()]

    def _request_speak(self, text: str) -> list[dict]:
        msg = text.strip()
        if not msg:
            return [self._error("nothing to speak")]
        if self.speaker is None:
            return [self._error("no call session configured")]
        expanded = self.abbreviations.expand(msg) if self.features.abbrev_on else msg
        self.pending_speak = PendingSpeak(original=msg, expanded=expanded)
        return []

    def take_pending_speak(self) -> Optional[PendingSpeak]:
        req, self.pending_speak = self.pending_speak, None
        return req

    def commit_speak(self, req: PendingSpeak, buf: AudioBuffer) -> list[dict]:
        """Ship synthesized audio to the stream and settle the bookkeeping."""
        out = resample_linear(buf, TELEPHONY_RATE)
        self.speaker(out)
        replies = []
        if self.features.archive_on:
            self.archive = self.archive.add(req.original)
            if self.archive_path:
                try:
                    textaccel.save_archive(self.archive, self.archive_path)
                except OSError as e:
                    replies.append(self._error(f"archive not saved: {e}"))
        self._set_text("")
        replies.append({"kind": "ack", "expanded": req.expanded,
                        "duration_ms": round(out.duration_ms)})
        replies.append(self.snapshot())
        return replies

    def fail_speak(self, req: PendingSpeak, detail: str) -> list[dict]:
        """Synthesis went wrong: report it; the typed text stays put."""
        return [self._error(f"synthesis failed: {detail}")]

    def run_pending_speak(self) -> list[dict]:
        """Synchronously finish a queued speak (tests and tone synth path)."""
        req = self.take_pending_speak()
        if req is None:
            return []
        try:
            buf = self.synthesizer(req.expanded)
        except (SynthesisError, ValueError) as e:
            return self.fail_speak(req, str(e))
        return self.commit_speak(req, buf)

    # ------------------------------------------------------------ protocol

    def handle(self, msg) -> list[dict]:
        """Apply one client message; never raises on bad input.

        Speak-triggering messages queue a PendingSpeak for the caller to
        drive (see run_pending_speak / the websocket server's worker).
        """
        if not isinstance(msg, dict) or not isinstance(msg.get("kind"), str):
            return [self._error("message must be a JSON object with a 'kind' field")]
        kind = msg["kind"]
        try:
            if kind == "type_text":
                text = msg.get("text")
                if not isinstance(text, str):
                    return [self._error("type_text needs a string 'text'")]
                self._set_text(text)
                return [self.snapshot()]

            if kind == "press_switch":
                if not self.features.scankb_on:
                    return [self._error("scanning keyboard is disabled")]
                self.scan_state, action = scankb.press(self.layout, self.scan_state)
                replies = [self._scan_message()]
                if action is not None:
                    replies.extend(self._apply_key_action(action))
                return replies

            if kind == "pick_suggestion":
                if not self.features.completion_on:
                    return [self._error("word completion is disabled")]
                index = msg.get("index")
                options = self.suggestions()
                if not isinstance(index, int) or not 0 <= index < len(options):
                    return [self._error(f"no suggestion at index {index!r}")]
                prefix = current_prefix(self.text)
                base = self.text[: len(self.text) - len(prefix)]
                self._set_text(base + options[index] + " ")
                return [self.snapshot()]

            if kind == "pick_archive":
                if not self.features.archive_on:
                    return [self._error("message archive is disabled")]
                index = msg.get("index")
                if not isinstance(index, int) or not 0 <= index < len(self.archive):
                    return [self._error(f"no archived message at index {index!r}")]
                self.archive, message = self.archive.pick(index)
                self._set_text(message)
                return [self.snapshot()]

            if kind == "speak":
                text = msg.get("text", self.text)
                if not isinstance(text, str):
                    return [self._error("speak 'text' must be a string")]
                return self._request_speak(text)

            if kind == "set_feature":
                feature, on = msg.get("feature"), msg.get("on")
                if not isinstance(feature, str) or not isinstance(on, bool):
                    return [self._error("set_feature needs 'feature' and boolean 'on'")]
                return self._set_feature(feature, on)

            if kind == "define_abbrev":
                abbr, expansion = msg.get("abbr"), msg.get("expansion")
                if not isinstance(abbr, str) or not isinstance(expansion, str):
                    return [self._error("define_abbrev needs 'abbr' and 'expansion' strings")]
                try:
                    self.abbreviations = self.abbreviations.define(abbr, expansion)
                except ValueError as e:
                    return [self._error(str(e))]
                if self.abbrev_path:
                    try:
                        self._save_abbreviations()
                    except OSError as e:
                        return [self.snapshot(), self._error(f"abbreviations not saved: {e}")]
                return [self.snapshot()]

            if kind == "get_state":
                return [self.snapshot(include_layout=True)]

            return [self._error(f"unknown message kind: {kind!r}")]
        except Exception as e:  # protocol safety: a bug must not kill the loop
            return [self._error(f"internal error handling {kind}: {e}")]

    def handle_message(self, msg) -> list[dict]:
        """handle() plus synchronous completion of any queued speak."""
        replies = self.handle(msg)
        replies.extend(self.run_pending_speak())
        return replies

    def _save_abbreviations(self) -> None:
        lines = [f"{abbr}\t{expansion}" for abbr, expansion in self.abbreviations.entries]
        tmp = self.abbrev_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        os.replace(tmp, self.abbrev_path)


def handle_client_message(composer: Composer, msg) -> tuple[Composer, list[dict]]:
    """Functional-shaped wrapper over Composer.handle_message."""
    return composer, composer.handle_message(msg)


def build_composer(config: AppConfig, *,
                   speaker: Optional[Callable[[AudioBuffer], None]] = None) -> Composer:
    """Assemble a Composer from an AppConfig (loads all data files)."""
    archive = (textaccel.load_archive(config.archive_path)
               if config.archive_path else textaccel.MessageArchive())
    return Composer(
        dictionary=load_dictionary_for(config),
        abbreviations=load_abbreviations_for(config),
        layout=load_layout_for(config),
        scan_config=scankb.ScanConfig(scan_period_ms=config.scan_period_ms),
        features=config.features,
        archive=archive,
        synthesizer=build_synthesizer(config.synth),
        speaker=speaker,
        archive_path=config.archive_path,
        abbrev_path=config.abbrev_path,
    )
