"""The full outbound path: text -> tone synth -> mu-law -> RTP over UDP,
with a loopback listener standing in for the person on the other end.

Runs entirely on localhost and exits on its own.
"""

import threading

import numpy as np

from easyvoice.speech import synthesize_tone
from easyvoice.voipbridge import (UdpTransmitter, WallClock, begin_stream,
                                  mulaw_decode_array, mulaw_encode_array,
                                  new_session, packetize, run_loopback_peer,
                                  stream)

# start the far end first; port 0 lets the OS pick
ready = threading.Event()
bound = {}
result = {}


def far_end():
    def on_listen(host, port):
        bound["addr"] = (host, port)
        ready.set()
    result["report"] = run_loopback_peer(0, duration_s=10.0,
                                         idle_stop_ms=300, on_listen=on_listen)


listener = threading.Thread(target=far_end)
listener.start()
ready.wait()
host, port = bound["addr"]
print(f"far end listening on {host}:{port}")

# synthesize and packetize one utterance
audio = synthesize_tone("hello there")
session = begin_stream(new_session((host, port)))
session, packets = packetize(session, audio)
print(f"'hello there' -> {audio.duration_ms:.0f} ms of audio"
      f" -> {len(packets)} RTP packets")
print(f"first packet: seq={packets[0].sequence} ts={packets[0].timestamp}"
      f" marker={packets[0].marker}")
print(f"last packet:  seq={packets[-1].sequence} ts={packets[-1].timestamp}")

# send at the real 20 ms cadence, then wait for the listener to time out
with UdpTransmitter((host, port)) as tx:
    stream(session, packets, WallClock(), tx.send)
listener.join()

report = result["report"]
print()
print("what the far end heard:")
for key, value in report.stats().items():
    print(f"  {key}: {value}")

# the wire is 8-bit mu-law; what arrives is the codec's view of the source
expected = mulaw_decode_array(mulaw_encode_array(audio.samples))
exact = np.array_equal(report.audio.samples, expected)
print(f"  bit-exact after codec roundtrip: {exact}")
