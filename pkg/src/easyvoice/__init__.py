"""easyvoice: type-to-talk VoIP for people who cannot speak into a call.

Typing accelerators (completion, abbreviations, a scanning keyboard for
single-switch users) feed a speech synthesizer whose output is injected
directly into an outbound RTP stream, never played through speakers.
"""

from .scankb import (Group, KeyAction, Leaf, ScanConfig, ScanState,
                     initial_state, load_layout, press, tick)
from .service import (AppConfig, Composer, FeatureFlags, build_composer,
                      build_synthesizer, check_config, handle_client_message)
from .speech import (AudioBuffer, ExternalSynthCommand, SynthesisError,
                     ToneSynthConfig, WavFormatError, parse_wav,
                     resample_linear, synthesize_external, synthesize_tone,
                     write_wav, write_wav_file)
from .textaccel import (AbbreviationTable, DictionaryFormatError,
                        FrequencyDictionary, MessageArchive, load_abbreviations,
                        load_archive, load_dictionary, save_archive)
from .voipbridge import (CallSession, ReceiveReport, RtpPacket, RtpStreamer,
                         SimulatedClock, mulaw_decode, mulaw_encode,
                         new_session, packetize, parse_rtp, run_loopback_peer,
                         serialize_rtp, stream)

__version__ = "0.1.0"
