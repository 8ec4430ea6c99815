"""Speech synthesis front ends and PCM plumbing.

The built-in engine renders text as deterministic tones, which keeps the
whole audio pipeline verifiable without a real TTS voice. Real engines
plug in as subprocesses that write a WAV file; parse_wav and
resample_linear adapt whatever they produce to the 8 kHz telephony path.
"""

from __future__ import annotations

import shlex
import struct
import subprocess
import tempfile
import os
from dataclasses import dataclass, field

import numpy as np


class WavFormatError(ValueError):
    pass


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono 16-bit PCM at a known sample rate."""

    sample_rate_hz: int
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int16))

    def __post_init__(self):
        if not 8000 <= self.sample_rate_hz <= 48000:
            raise ValueError(f"sample rate {self.sample_rate_hz} outside [8000, 48000]")
        arr = np.asarray(self.samples)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        if arr.dtype != np.int16:
            if arr.size and (arr.min() < -32768 or arr.max() > 32767):
                raise ValueError("sample values outside int16 range")
            arr = arr.astype(np.int16)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return int(self.samples.size)

    @property
    def duration_ms(self) -> float:
        return len(self) * 1000.0 / self.sample_rate_hz

    def same_audio(self, other: "AudioBuffer") -> bool:
        return (self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class ToneSynthConfig:
    per_char_ms: int = 80
    base_freq_hz: float = 220.0
    amplitude: int = 12000
    sample_rate_hz: int = 8000

    def __post_init__(self):
        if self.per_char_ms < 1:
            raise ValueError("per_char_ms must be >= 1")
        if not 0 < self.amplitude <= 32767:
            raise ValueError("amplitude must be in (0, 32767]")
        if self.base_freq_hz <= 0:
            raise ValueError("base_freq_hz must be positive")


def synthesize_tone(text: str, cfg: ToneSynthConfig = ToneSynthConfig()) -> AudioBuffer:
    """Render each character as a fixed-duration sine, whitespace as silence.

    The pitch is a function of the character code (36 steps per octave above
    base_freq_hz), so different characters are audibly and measurably
    distinct. Segments get short linear fades so packet boundaries do not
    click. Output is a pure function of (text, cfg).
    """
    rate = cfg.sample_rate_hz
    n_seg = cfg.per_char_ms * rate // 1000
    out = np.zeros(len(text) * n_seg, dtype=np.int16)
    if n_seg == 0 or not text:
        return AudioBuffer(rate, out)

    ramp_n = min(5 * rate // 1000, n_seg // 2)
    envelope = np.ones(n_seg)
    if ramp_n:
        fade = np.linspace(0.0, 1.0, ramp_n, endpoint=False)
        envelope[:ramp_n] = fade
        envelope[-ramp_n:] = fade[::-1]
    t = np.arange(n_seg) / rate

    for i, ch in enumerate(text):
        if ch.isspace():
            continue
        freq = cfg.base_freq_hz * 2.0 ** ((ord(ch) % 36) / 36.0)
        seg = cfg.amplitude * envelope * np.sin(2.0 * np.pi * freq * t)
        out[i * n_seg:(i + 1) * n_seg] = np.rint(seg).astype(np.int16)
    return AudioBuffer(rate, out)


def parse_wav(data: bytes) -> AudioBuffer:
    """Decode a RIFF/WAVE container holding 16-bit PCM, mono or stereo.

    Stereo is downmixed by averaging each frame. Walks chunks rather than
    assuming the canonical 44-byte layout, since real encoders like to
    insert LIST/fact chunks before the data.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < size:
                raise WavFormatError("data chunk truncated")
            pcm = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or pcm is None:
        raise WavFormatError("missing fmt or data chunk")
    format_code, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if format_code != 1:
        raise WavFormatError(f"only PCM supported, got format code {format_code}")
    if bits != 16:
        raise WavFormatError(f"only 16-bit samples supported, got {bits}")
    if channels not in (1, 2):
        raise WavFormatError(f"only mono/stereo supported, got {channels} channels")

    frames = np.frombuffer(pcm[: len(pcm) - len(pcm) % (2 * channels)], dtype="<i2")
    if channels == 2:
        frames = frames.reshape(-1, 2)
        mono = (frames[:, 0].astype(np.int32) + frames[:, 1]) // 2
        frames = mono.astype(np.int16)
    return AudioBuffer(sample_rate, frames)


def write_wav(buf: AudioBuffer) -> bytes:
    """Canonical 44-byte-header WAV for a mono 16-bit buffer."""
    pcm = buf.samples.astype("<i2").tobytes()
    rate = buf.sample_rate_hz
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, 1, 1, rate, rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def write_wav_file(buf: AudioBuffer, path: str) -> None:
    with open(path, "wb") as f:
        f.write(write_wav(buf))


@dataclass(frozen=True)
class ExternalSynthCommand:
    """Subprocess contract for a real TTS engine.

    ``template`` is a command line containing {text} and {out}; the engine
    must exit 0 and leave 16-bit PCM WAV at {out}.
    """

    template: str
    timeout_ms: int = 10000

    def __post_init__(self):
        if "{text}" not in self.template or "{out}" not in self.template:
            raise ValueError("template must contain {text} and {out} placeholders")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")


def synthesize_external(cmd: ExternalSynthCommand, text: str) -> AudioBuffer:
    """Run the engine command and ingest the WAV it writes.

    Placeholders are substituted into already-split argv entries, so the
    text reaches the engine as one argument with no shell in the loop.
    """
    with tempfile.TemporaryDirectory(prefix="easyvoice-synth-") as tmpdir:
        out_path = os.path.join(tmpdir, "out.wav")
        argv = [a.replace("{text}", text).replace("{out}", out_path)
                for a in shlex.split(cmd.template)]
        try:
            proc = subprocess.run(
                argv, capture_output=True, timeout=cmd.timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            raise SynthesisError(
                f"synthesizer timed out after {cmd.timeout_ms} ms: {argv[0]}") from None
        except OSError as e:
            raise SynthesisError(f"cannot run synthesizer {argv[0]}: {e}") from None
        if proc.returncode != 0:
            detail = proc.stderr.decode(errors="replace").strip()
            raise SynthesisError(
                f"synthesizer exited {proc.returncode}: {detail or '(no stderr)'}")
        try:
            with open(out_path, "rb") as f:
                return parse_wav(f.read())
        except FileNotFoundError:
            raise SynthesisError("synthesizer exited 0 but wrote no output file") from None


def resample_linear(buf: AudioBuffer, target_rate_hz: int) -> AudioBuffer:
    """Linear-interpolation resample; identity when rates already match."""
    if not 8000 <= target_rate_hz <= 48000:
        raise ValueError(f"target rate {target_rate_hz} outside [8000, 48000]")
    if target_rate_hz == buf.sample_rate_hz or len(buf) == 0:
        return buf if target_rate_hz == buf.sample_rate_hz else AudioBuffer(target_rate_hz)
    n_out = round(len(buf) * target_rate_hz / buf.sample_rate_hz)
    positions = np.arange(n_out) * (buf.sample_rate_hz / target_rate_hz)
    resampled = np.interp(positions, np.arange(len(buf)), buf.samples.astype(np.float64))
    return AudioBuffer(target_rate_hz, np.rint(resampled).astype(np.int16))
