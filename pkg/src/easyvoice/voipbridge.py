"""Outbound telephony path: G.711 mu-law, RTP packetization, paced UDP
streaming, and a loopback receiver for verifying the far end.

The synthesized signal is written straight onto the wire; nothing in this
module can open a speaker or microphone, so the remote party can never be
re-captured and echoed back by us. Pacing uses an injected clock, which
lets tests run the whole path in simulated time.
"""

from __future__ import annotations

import json
import random
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .speech import AudioBuffer

TELEPHONY_RATE = 8000
SAMPLES_PER_PACKET = 160            # 20 ms at 8 kHz
PACKET_INTERVAL_MS = 20
PT_PCMU = 0

_BIAS = 0x84
_CLIP = 32635

IDLE = "idle"
STREAMING = "streaming"


class RtpError(ValueError):
    pass


class StreamError(RuntimeError):
    """Raised when the paced sender loses its socket; carries the session
    already transitioned to idle."""

    def __init__(self, message: str, session: "CallSession"):
        super().__init__(message)
        self.session = session


# ---------------------------------------------------------------- G.711 u-law

def mulaw_encode(sample: int) -> int:
    """Compress one signed 16-bit sample to a mu-law byte.

    Magnitude is clipped, biased by 132, split into one of 8 power-of-two
    segments plus a 4-bit mantissa, then the whole byte is complemented
    (so digital silence is 0xFF, not 0x00).
    """
    sign = 0x80 if sample < 0 else 0x00
    mag = -sample if sample < 0 else sample
    if mag > _CLIP:
        mag = _CLIP
    mag += _BIAS
    exponent = (mag >> 7).bit_length() - 1
    mantissa = (mag >> (exponent + 3)) & 0x0F
    return ~(sign | (exponent << 4) | mantissa) & 0xFF


def mulaw_decode(code: int) -> int:
    """Expand one mu-law byte back to a signed 16-bit sample."""
    b = ~code & 0xFF
    exponent = (b >> 4) & 0x07
    mantissa = b & 0x0F
    mag = (((mantissa << 3) + _BIAS) << exponent) - _BIAS
    return -mag if b & 0x80 else mag


MULAW_SILENCE = mulaw_encode(0)  # 0xFF

_DECODE_LUT = np.array([mulaw_decode(b) for b in range(256)], dtype=np.int16)

# segment lower bounds of the biased magnitude, for vectorized encode
_SEG_BOUNDS = np.array([0x100 << e for e in range(7)], dtype=np.int32)


def mulaw_encode_array(samples: np.ndarray) -> np.ndarray:
    """Vectorized mulaw_encode for int16 arrays (same codes, bit for bit)."""
    x = samples.astype(np.int32)
    sign = np.where(x < 0, 0x80, 0)
    mag = np.minimum(np.abs(x), _CLIP) + _BIAS
    exponent = np.searchsorted(_SEG_BOUNDS, mag, side="right")
    mantissa = (mag >> (exponent + 3)) & 0x0F
    return (~(sign | (exponent << 4) | mantissa) & 0xFF).astype(np.uint8)


def mulaw_decode_array(codes: np.ndarray) -> np.ndarray:
    return _DECODE_LUT[np.asarray(codes, dtype=np.uint8)]


# ------------------------------------------------------------------- packets

@dataclass(frozen=True)
class RtpPacket:
    sequence: int
    timestamp: int
    ssrc: int
    payload: bytes
    marker: bool = False
    version: int = 2
    payload_type: int = PT_PCMU

    def __post_init__(self):
        if self.version != 2:
            raise RtpError(f"version must be 2, got {self.version}")
        if self.payload_type != PT_PCMU:
            raise RtpError(f"payload type must be {PT_PCMU} (PCMU), got {self.payload_type}")
        if len(self.payload) != SAMPLES_PER_PACKET:
            raise RtpError(f"payload must be {SAMPLES_PER_PACKET} bytes, got {len(self.payload)}")
        if not 0 <= self.sequence <= 0xFFFF:
            raise RtpError(f"sequence {self.sequence} outside 16 bits")
        if not 0 <= self.timestamp <= 0xFFFFFFFF:
            raise RtpError(f"timestamp {self.timestamp} outside 32 bits")
        if not 0 <= self.ssrc <= 0xFFFFFFFF:
            raise RtpError(f"ssrc {self.ssrc} outside 32 bits")


_HEADER = struct.Struct("!BBHII")


def serialize_rtp(p: RtpPacket) -> bytes:
    byte0 = p.version << 6            # P=0, X=0, CC=0
    byte1 = (0x80 if p.marker else 0) | p.payload_type
    return _HEADER.pack(byte0, byte1, p.sequence, p.timestamp, p.ssrc) + p.payload


def parse_rtp(data: bytes) -> RtpPacket:
    if len(data) < _HEADER.size:
        raise RtpError(f"datagram too short for RTP: {len(data)} bytes")
    byte0, byte1, seq, ts, ssrc = _HEADER.unpack_from(data)
    version = byte0 >> 6
    if version != 2:
        raise RtpError(f"unsupported RTP version {version}")
    if byte0 & 0x3F:
        raise RtpError("padding/extension/CSRC not supported")
    return RtpPacket(
        sequence=seq, timestamp=ts, ssrc=ssrc,
        payload=data[_HEADER.size:],
        marker=bool(byte1 & 0x80), payload_type=byte1 & 0x7F)


# ------------------------------------------------------------------- session

@dataclass(frozen=True)
class CallSession:
    peer: tuple[str, int]
    ssrc: int
    next_sequence: int
    next_timestamp: int
    state: str = IDLE


def new_session(peer: tuple[str, int], *, ssrc: Optional[int] = None,
                sequence: Optional[int] = None, timestamp: Optional[int] = None,
                rng: Optional[random.Random] = None) -> CallSession:
    """Fresh idle session; ids start random per usual RTP practice unless pinned."""
    r = rng or random
    return CallSession(
        peer=peer,
        ssrc=r.getrandbits(32) if ssrc is None else ssrc,
        next_sequence=r.getrandbits(16) if sequence is None else sequence,
        next_timestamp=r.getrandbits(32) if timestamp is None else timestamp,
    )


def begin_stream(session: CallSession) -> CallSession:
    return replace(session, state=STREAMING)


def end_stream(session: CallSession) -> CallSession:
    return replace(session, state=IDLE)


def packetize(session: CallSession, buf: AudioBuffer) -> tuple[CallSession, list[RtpPacket]]:
    """Chop an 8 kHz buffer into 20 ms PCMU packets.

    The last partial frame is padded with mu-law silence. The first packet
    of the utterance carries the marker bit; counters advance by one
    sequence step and 160 timestamp units per packet.
    """
    if buf.sample_rate_hz != TELEPHONY_RATE:
        raise RtpError(f"packetize needs {TELEPHONY_RATE} Hz audio, got {buf.sample_rate_hz}")
    codes = mulaw_encode_array(buf.samples).tobytes()
    seq, ts = session.next_sequence, session.next_timestamp
    packets = []
    for off in range(0, len(codes), SAMPLES_PER_PACKET):
        frame = codes[off:off + SAMPLES_PER_PACKET]
        if len(frame) < SAMPLES_PER_PACKET:
            frame += bytes([MULAW_SILENCE]) * (SAMPLES_PER_PACKET - len(frame))
        packets.append(RtpPacket(
            sequence=seq, timestamp=ts, ssrc=session.ssrc,
            payload=frame, marker=not packets))
        seq = (seq + 1) & 0xFFFF
        ts = (ts + SAMPLES_PER_PACKET) & 0xFFFFFFFF
    return replace(session, next_sequence=seq, next_timestamp=ts), packets


_SILENCE_PAYLOAD = bytes([MULAW_SILENCE]) * SAMPLES_PER_PACKET


def silence_packet(session: CallSession) -> tuple[CallSession, RtpPacket]:
    """One 20 ms comfort-silence frame, keeping seq/timestamp moving."""
    pkt = RtpPacket(
        sequence=session.next_sequence, timestamp=session.next_timestamp,
        ssrc=session.ssrc, payload=_SILENCE_PAYLOAD, marker=False)
    return replace(
        session,
        next_sequence=(session.next_sequence + 1) & 0xFFFF,
        next_timestamp=(session.next_timestamp + SAMPLES_PER_PACKET) & 0xFFFFFFFF,
    ), pkt


# --------------------------------------------------------------------- clocks

class SimulatedClock:
    """Deterministic clock for tests: sleeping jumps time forward exactly."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def sleep_until_ms(self, deadline_ms: int) -> None:
        if deadline_ms > self._now:
            self._now = deadline_ms


class WallClock:
    def __init__(self):
        self._origin = time.monotonic()

    def now_ms(self) -> float:
        return (time.monotonic() - self._origin) * 1000.0

    def sleep_until_ms(self, deadline_ms: float) -> None:
        remaining = deadline_ms - self.now_ms()
        if remaining > 0:
            time.sleep(remaining / 1000.0)


def stream(session: CallSession, packets: list[RtpPacket], clock,
           send: Callable[[bytes], None], start_ms: Optional[float] = None) -> CallSession:
    """Send packets at one per 20 ms, starting now (or at start_ms).

    Pure pacing: serialization and the send callable are the only effects.
    A send failure flips the session to idle and surfaces as StreamError.
    """
    if session.state != STREAMING:
        raise RtpError("stream() needs a session in streaming state")
    t0 = clock.now_ms() if start_ms is None else start_ms
    for i, pkt in enumerate(packets):
        clock.sleep_until_ms(t0 + i * PACKET_INTERVAL_MS)
        try:
            send(serialize_rtp(pkt))
        except OSError as e:
            raise StreamError(f"send failed: {e}", end_stream(session)) from e
    return session


class UdpTransmitter:
    def __init__(self, peer: tuple[str, int]):
        self.peer = peer
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, datagram: bytes) -> None:
        self._sock.sendto(datagram, self.peer)

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ----------------------------------------------------------------- receiving

@dataclass(frozen=True)
class ReceiveReport:
    audio: AudioBuffer
    packets_received: int
    packets_lost: int
    out_of_order: int

    def stats(self) -> dict:
        return {
            "packets_received": self.packets_received,
            "packets_lost": self.packets_lost,
            "out_of_order": self.out_of_order,
            "samples": len(self.audio),
            "duration_ms": self.audio.duration_ms,
        }


def assemble_report(arrivals: list[RtpPacket]) -> ReceiveReport:
    """Reconstruct the stream a listener would hear from packets in arrival
    order: unwrap sequence numbers, count inversions, drop duplicates
    (first copy wins), and fill missing frames with silence.
    """
    if not arrivals:
        return ReceiveReport(AudioBuffer(TELEPHONY_RATE), 0, 0, 0)

    extended: list[int] = []
    out_of_order = 0
    prev = arrivals[0].sequence
    for pkt in arrivals:
        delta = ((pkt.sequence - (prev & 0xFFFF)) + 0x8000) % 0x10000 - 0x8000
        ext = prev + delta
        if extended and ext < extended[-1]:
            out_of_order += 1
        extended.append(ext)
        prev = ext

    by_seq: dict[int, bytes] = {}
    for ext, pkt in zip(extended, arrivals):
        by_seq.setdefault(ext, pkt.payload)

    lo, hi = min(by_seq), max(by_seq)
    frames = [by_seq.get(s, _SILENCE_PAYLOAD) for s in range(lo, hi + 1)]
    codes = np.frombuffer(b"".join(frames), dtype=np.uint8)
    return ReceiveReport(
        audio=AudioBuffer(TELEPHONY_RATE, mulaw_decode_array(codes)),
        packets_received=len(arrivals),
        packets_lost=(hi - lo + 1) - len(by_seq),
        out_of_order=out_of_order,
    )


def run_loopback_peer(port: int, duration_s: float, *, host: str = "127.0.0.1",
                      idle_stop_ms: Optional[int] = None,
                      on_listen: Optional[Callable[[str, int], None]] = None,
                      ) -> ReceiveReport:
    """Stand-in for the far party: record what arrives on a UDP port.

    Listens for duration_s (or until idle_stop_ms passes with no traffic
    after the first packet) and reports the reconstructed audio. Datagrams
    that do not parse as our RTP are ignored.
    """
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind((host, port))
        bound_host, bound_port = sock.getsockname()
        if on_listen:
            on_listen(bound_host, bound_port)
        arrivals: list[RtpPacket] = []
        deadline = time.monotonic() + duration_s
        last_rx = None
        while True:
            now = time.monotonic()
            if now >= deadline:
                break
            if (idle_stop_ms is not None and last_rx is not None
                    and (now - last_rx) * 1000.0 >= idle_stop_ms):
                break
            sock.settimeout(min(deadline - now, 0.05))
            try:
                datagram, _addr = sock.recvfrom(4096)
            except socket.timeout:
                continue
            try:
                arrivals.append(parse_rtp(datagram))
                last_rx = time.monotonic()
            except RtpError:
                continue
        return assemble_report(arrivals)
    finally:
        sock.close()


# ------------------------------------------------------------ pacing thread

class RtpStreamer:
    """Owns the socket, the session counters, and the 20 ms pacing loop.

    The control plane hands in whole utterances with speak(); the loop
    packetizes them at dequeue time and transmits silence frames whenever
    there is nothing queued, so the outbound stream never stops. All
    socket and counter access happens on the loop thread.
    """

    def __init__(self, peer: tuple[str, int], *, clock=None,
                 ssrc: Optional[int] = None, keepalive: bool = True,
                 rng: Optional[random.Random] = None, transmitter=None):
        self._session = begin_stream(new_session(peer, ssrc=ssrc, rng=rng))
        self._transmitter = transmitter if transmitter is not None else UdpTransmitter(peer)
        self._clock = clock or WallClock()
        self._keepalive = keepalive
        self._pending: deque[AudioBuffer] = deque()
        self._current: deque[RtpPacket] = deque()
        self._lock = threading.Lock()
        self._stop_requested = threading.Event()
        self._idle = threading.Event()
        self._idle.set()
        self._thread: Optional[threading.Thread] = None
        self.error: Optional[str] = None
        self.packets_sent = 0

    @property
    def session(self) -> CallSession:
        return self._session

    def start(self) -> None:
        if self._thread is not None:
            raise RuntimeError("streamer already started")
        self._thread = threading.Thread(target=self._run, name="rtp-streamer", daemon=True)
        self._thread.start()

    def speak(self, buf: AudioBuffer) -> None:
        if buf.sample_rate_hz != TELEPHONY_RATE:
            raise RtpError(f"streamer takes {TELEPHONY_RATE} Hz audio")
        with self._lock:
            self._pending.append(buf)
            self._idle.clear()

    def wait_idle(self, timeout: Optional[float] = None) -> bool:
        """Block until every queued utterance has been transmitted."""
        return self._idle.wait(timeout)

    def stop(self, drain: bool = False, timeout: float = 30.0) -> None:
        if drain:
            self.wait_idle(timeout)
        self._stop_requested.set()
        if self._thread is not None:
            self._thread.join(timeout)
        self._transmitter.close()
        self._session = end_stream(self._session)

    def _next_packet(self) -> Optional[RtpPacket]:
        if self._current:
            return self._current.popleft()
        with self._lock:
            if self._pending:
                buf = self._pending.popleft()
            else:
                self._idle.set()
                buf = None
        if buf is not None:
            self._session, packets = packetize(self._session, buf)
            self._current = deque(packets)
            if self._current:
                return self._current.popleft()
        if self._keepalive:
            self._session, pkt = silence_packet(self._session)
            return pkt
        return None

    def _run(self) -> None:
        deadline = self._clock.now_ms()
        while not self._stop_requested.is_set():
            pkt = self._next_packet()
            if pkt is not None:
                try:
                    self._transmitter.send(serialize_rtp(pkt))
                    self.packets_sent += 1
                except OSError as e:
                    self.error = f"send failed: {e}"
                    self._session = end_stream(self._session)
                    self._idle.set()
                    return
            deadline += PACKET_INTERVAL_MS
            self._clock.sleep_until_ms(deadline)


def save_report(report: ReceiveReport, wav_path: str, stats_path: str) -> None:
    """Persist a loopback run the way the CLI mode does: audio + stats."""
    from .speech import write_wav_file

    write_wav_file(report.audio, wav_path)
    with open(stats_path, "w", encoding="utf-8") as f:
        json.dump(report.stats(), f, indent=2)
        f.write("\n")
