"""Typing accelerators: frequency-ranked word completion, user abbreviations,
and an archive of recently spoken messages.

Everything here is an immutable value; mutating operations return a new
object. The service layer owns serialization of updates.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, replace
from typing import Iterable


class DictionaryFormatError(ValueError):
    """Raised for malformed dictionary/abbreviation files. Carries the
    1-based line number when the problem is tied to a specific line."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class DictionaryEntry:
    word: str
    frequency: int

    def __post_init__(self):
        if not self.word or any(c.isspace() for c in self.word):
            raise ValueError(f"dictionary word must be non-empty without whitespace: {self.word!r}")
        if self.frequency < 0:
            raise ValueError(f"frequency must be >= 0, got {self.frequency}")


@dataclass(frozen=True, eq=False)
class FrequencyDictionary:
    """Corpus words with occurrence counts, queried by prefix.

    Words are unique case-insensitively. Completion returns at most
    ``max_suggestions`` words, highest frequency first, ties broken by
    word (case-insensitive ascending), keeping the stored casing.
    """

    entries: tuple[DictionaryEntry, ...] = ()
    max_suggestions: int = 8

    def __post_init__(self):
        if self.max_suggestions < 1:
            raise ValueError("max_suggestions must be >= 1")
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: set[str] = set()
        for e in self.entries:
            key = e.word.lower()
            if key in seen:
                raise ValueError(f"duplicate word (case-insensitive): {e.word!r}")
            seen.add(key)
        ranked = sorted(self.entries, key=lambda e: (-e.frequency, e.word.lower()))
        object.__setattr__(self, "_ranked", tuple((e.word.lower(), e.word) for e in ranked))

    def __len__(self):
        return len(self.entries)

    def complete(self, prefix: str) -> list[str]:
        """Words starting with ``prefix`` (case-insensitive), best first.

        An empty prefix returns the overall most frequent words, which is
        what a scanning user sees before typing anything.
        """
        p = prefix.lower()
        out: list[str] = []
        for lowered, word in self._ranked:
            if lowered.startswith(p):
                out.append(word)
                if len(out) == self.max_suggestions:
                    break
        return out


def _data_lines(lines: Iterable[str]):
    """Yield (line_no, stripped) for lines that carry data."""
    for line_no, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield line_no, stripped


def load_dictionary(source: Iterable[str], max_suggestions: int = 8) -> FrequencyDictionary:
    """Parse ``word<TAB>frequency`` lines into a FrequencyDictionary.

    ``source`` is any iterable of text lines (an open file qualifies).
    Blank lines and ``#`` comments are skipped.
    """
    entries: list[DictionaryEntry] = []
    seen: set[str] = set()
    for line_no, stripped in _data_lines(source):
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise DictionaryFormatError(
                f"expected 'word<TAB>frequency', got {stripped!r}", line_no)
        word, freq_text = parts
        try:
            frequency = int(freq_text)
        except ValueError:
            raise DictionaryFormatError(
                f"frequency is not an integer: {freq_text!r}", line_no) from None
        try:
            entry = DictionaryEntry(word, frequency)
        except ValueError as e:
            raise DictionaryFormatError(str(e), line_no) from None
        key = word.lower()
        if key in seen:
            raise DictionaryFormatError(f"duplicate word: {word!r}", line_no)
        seen.add(key)
        entries.append(entry)
    return FrequencyDictionary(tuple(entries), max_suggestions=max_suggestions)


_TOKEN_RE = re.compile(r"\w+")


@dataclass(frozen=True, eq=False)
class AbbreviationTable:
    """User-defined short forms, expanded whole-token and non-recursively."""

    entries: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        by_key: dict[str, str] = {}
        for abbr, expansion in self.entries:
            if not abbr or any(c.isspace() for c in abbr):
                raise ValueError(f"abbreviation must be non-empty without whitespace: {abbr!r}")
            if not expansion:
                raise ValueError(f"empty expansion for {abbr!r}")
            key = abbr.lower()
            if key in by_key:
                raise ValueError(f"duplicate abbreviation (case-insensitive): {abbr!r}")
            by_key[key] = expansion
        object.__setattr__(self, "_by_key", by_key)

    def __len__(self):
        return len(self.entries)

    def lookup(self, abbr: str) -> str | None:
        return self._by_key.get(abbr.lower())

    def define(self, abbr: str, expansion: str) -> "AbbreviationTable":
        """Add or replace a definition (case-insensitive on the short form)."""
        kept = tuple((a, e) for a, e in self.entries if a.lower() != abbr.lower())
        return AbbreviationTable(kept + ((abbr, expansion),))

    def expand(self, text: str) -> str:
        """Replace every whole token that matches an abbreviation.

        Tokens are maximal runs of word characters; punctuation and spacing
        are kept as-is. One left-to-right pass: expansions are never
        re-scanned, so a definition cannot loop.
        """
        if not self._by_key:
            return text

        def sub(match: re.Match) -> str:
            expansion = self._by_key.get(match.group(0).lower())
            return expansion if expansion is not None else match.group(0)

        return _TOKEN_RE.sub(sub, text)


def load_abbreviations(source: Iterable[str]) -> AbbreviationTable:
    """Parse ``abbr<TAB>expansion`` lines (same comment rules as dictionaries)."""
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    for line_no, stripped in _data_lines(source):
        parts = stripped.split("\t", 1)
        if len(parts) != 2 or not parts[1].strip():
            raise DictionaryFormatError(
                f"expected 'abbr<TAB>expansion', got {stripped!r}", line_no)
        abbr, expansion = parts[0], parts[1].strip()
        if not abbr or any(c.isspace() for c in abbr):
            raise DictionaryFormatError(
                f"abbreviation must not contain whitespace: {abbr!r}", line_no)
        if abbr.lower() in seen:
            raise DictionaryFormatError(f"duplicate abbreviation: {abbr!r}", line_no)
        seen.add(abbr.lower())
        entries.append((abbr, expansion))
    return AbbreviationTable(tuple(entries))


@dataclass(frozen=True)
class MessageArchive:
    """Recently spoken messages, most recent first, no duplicates."""

    messages: tuple[str, ...] = ()
    capacity: int = 50

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        object.__setattr__(self, "messages", tuple(self.messages))
        if len(self.messages) > self.capacity:
            raise ValueError("archive over capacity")
        if len(set(self.messages)) != len(self.messages):
            raise ValueError("archive contains duplicates")

    def __len__(self):
        return len(self.messages)

    def add(self, message: str) -> "MessageArchive":
        """Put ``message`` at the front, dropping an earlier copy and, if the
        archive is full, the oldest entry. Blank messages are rejected."""
        msg = message.strip()
        if not msg:
            raise ValueError("refusing to archive an empty message")
        rest = [m for m in self.messages if m != msg]
        return replace(self, messages=(msg, *rest[: self.capacity - 1]))

    def pick(self, index: int) -> tuple["MessageArchive", str]:
        """Return the message at ``index`` and move it to the front."""
        if not 0 <= index < len(self.messages):
            raise IndexError(f"archive index {index} out of range (size {len(self.messages)})")
        msg = self.messages[index]
        rest = tuple(m for i, m in enumerate(self.messages) if i != index)
        return replace(self, messages=(msg, *rest)), msg


def save_archive(archive: MessageArchive, path: str) -> None:
    """Persist the archive as one JSON document, written atomically."""
    payload = json.dumps({"messages": list(archive.messages)}, ensure_ascii=False)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".archive-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_archive(path: str, capacity: int = 50) -> MessageArchive:
    """Read an archive written by save_archive; a missing file is empty."""
    if not os.path.exists(path):
        return MessageArchive(capacity=capacity)
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    messages = data.get("messages", [])
    if not isinstance(messages, list) or not all(isinstance(m, str) for m in messages):
        raise DictionaryFormatError(f"{path}: expected {{\"messages\": [...]}}")
    return MessageArchive(tuple(messages[:capacity]), capacity=capacity)
