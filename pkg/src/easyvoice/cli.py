"""Command line entry points.

serve        run the composer + web UI + outbound RTP stream
loopback     act as the far-end test peer: record, report, write a WAV
speak-once   push one utterance through the full pipeline and exit
check-config validate configuration and data files without starting
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import service, voipbridge
from .service import AppConfig, ConfigError, build_composer, check_config, parse_peer
from .speech import AudioBuffer
from .voipbridge import (RtpStreamer, UdpTransmitter, WallClock, begin_stream,
                         new_session, packetize, run_loopback_peer,
                         save_report, stream)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (or set EASYVOICE_CONFIG)")
    p.add_argument("--peer", help="far end as host:port")
    p.add_argument("--listen", type=int, help="UDP port for loopback mode")
    p.add_argument("--ui-port", type=int, dest="ui_port", help="HTTP/WebSocket port")
    p.add_argument("--dict", dest="dict_path", help="word frequency file (word<TAB>count)")
    p.add_argument("--abbrev", dest="abbrev_path", help="abbreviation file (abbr<TAB>expansion)")
    p.add_argument("--layout", dest="layout_path", help="scanning keyboard layout JSON")
    p.add_argument("--archive", dest="archive_path", help="spoken-message archive JSON")
    p.add_argument("--scan-period", type=int, dest="scan_period_ms",
                   help="scanning cursor period in ms")
    p.add_argument("--synth", help="speech engine: tone | cmd:<template with {text} {out}>")
    p.add_argument("--no-archive", action="store_true")
    p.add_argument("--no-completion", action="store_true")
    p.add_argument("--no-abbrev", action="store_true")
    p.add_argument("--no-scankb", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="easyvoice",
        description="Type-to-talk calling: synthesized speech injected into an RTP stream.")
    sub = parser.add_subparsers(dest="mode", required=True)

    serve = sub.add_parser("serve", help="run the full system")
    _add_common(serve)
    serve.add_argument("--static", help="directory with the web UI bundle")

    loopback = sub.add_parser("loopback", help="far-end test peer: record what arrives")
    _add_common(loopback)
    loopback.add_argument("--duration", type=float, default=10.0,
                          help="seconds to listen (default 10)")
    loopback.add_argument("--idle-stop", type=int, dest="idle_stop_ms",
                          help="stop early after this many ms without traffic")
    loopback.add_argument("--out", default="received.wav", help="WAV output path")
    loopback.add_argument("--stats", default="loopback_stats.json", help="stats JSON path")

    speak = sub.add_parser("speak-once", help="speak one line to the peer and exit")
    _add_common(speak)
    speak.add_argument("--text", required=True, help="what to say")

    check = sub.add_parser("check-config", help="validate config and data files")
    _add_common(check)
    return parser


def config_from_args(args: argparse.Namespace) -> AppConfig:
    """defaults < config file < explicit flags."""
    path = args.config or os.environ.get("EASYVOICE_CONFIG")
    config = service.load_config_file(path) if path else AppConfig()

    updates = {}
    if args.peer is not None:
        updates["peer"] = parse_peer(args.peer)
    if args.listen is not None:
        updates["listen_port"] = args.listen
    for key in ("ui_port", "dict_path", "abbrev_path", "layout_path",
                "archive_path", "scan_period_ms", "synth"):
        value = getattr(args, key)
        if value is not None:
            updates[key] = value

    features = config.features
    for flag, feature in (("no_archive", "archive"), ("no_completion", "completion"),
                          ("no_abbrev", "abbrev"), ("no_scankb", "scankb")):
        if getattr(args, flag):
            features = features.with_feature(feature, False)
    return replace(config, features=features, **updates)


def _mode_check_config(config: AppConfig) -> int:
    problems = check_config(config)
    if problems:
        for p in problems:
            print(f"config problem: {p}", file=sys.stderr)
        return 1
    peer = f"{config.peer[0]}:{config.peer[1]}" if config.peer else "(not set)"
    print(f"config ok: peer={peer} synth={config.synth} "
          f"features={config.features.as_dict()}")
    return 0


def _mode_loopback(config: AppConfig, args: argparse.Namespace) -> int:
    def on_listen(host: str, port: int) -> None:
        print(f"listening on {host}:{port}", flush=True)

    try:
        report = run_loopback_peer(
            config.listen_port, args.duration,
            idle_stop_ms=args.idle_stop_ms, on_listen=on_listen)
    except OSError as e:
        print(f"cannot bind UDP port {config.listen_port}: {e}", file=sys.stderr)
        return 1
    save_report(report, args.out, args.stats)
    s = report.stats()
    print(f"received={s['packets_received']} lost={s['packets_lost']} "
          f"out_of_order={s['out_of_order']} samples={s['samples']}")
    print(f"wrote {args.out} and {args.stats}")
    return 0


def _mode_speak_once(config: AppConfig, args: argparse.Namespace) -> int:
    if config.peer is None:
        print("speak-once needs --peer host:port", file=sys.stderr)
        return 1
    spoken: list[AudioBuffer] = []
    try:
        composer = build_composer(config, speaker=spoken.append)
    except (OSError, ValueError) as e:
        print(f"startup failure: {e}", file=sys.stderr)
        return 1
    replies = composer.handle_message({"kind": "speak", "text": args.text})
    errors = [r["detail"] for r in replies if r["kind"] == "error"]
    if errors or not spoken:
        for detail in errors or ["nothing was synthesized"]:
            print(f"speak failed: {detail}", file=sys.stderr)
        return 1
    ack = next(r for r in replies if r["kind"] == "ack")

    session, packets = packetize(begin_stream(new_session(config.peer)), spoken[0])
    try:
        with UdpTransmitter(config.peer) as tx:
            stream(session, packets, WallClock(), tx.send)
    except voipbridge.StreamError as e:
        print(f"stream failed: {e}", file=sys.stderr)
        return 1
    print(f"spoke {ack['expanded']!r}: {len(packets)} packets, "
          f"{ack['duration_ms']} ms to {config.peer[0]}:{config.peer[1]}")
    return 0


def _mode_serve(config: AppConfig, args: argparse.Namespace) -> int:
    import uvicorn

    from .webserver import create_app

    problems = check_config(config)
    if problems:
        for p in problems:
            print(f"startup failure: {p}", file=sys.stderr)
        return 1

    streamer = None
    speaker = None
    if config.peer is not None:
        streamer = RtpStreamer(config.peer)
        streamer.start()

        def speaker(buf):
            streamer.speak(buf)
            print(f"queued {buf.duration_ms:.0f} ms of speech for injection", flush=True)

        print(f"streaming RTP/PCMU to {config.peer[0]}:{config.peer[1]}", flush=True)
    else:
        print("no --peer set: speak requests will be rejected until configured", flush=True)

    composer = build_composer(config, speaker=speaker)
    app = create_app(composer, static_dir=args.static)
    print(f"web UI on http://127.0.0.1:{config.ui_port} (WebSocket /ws)", flush=True)
    try:
        uvicorn.run(app, host="0.0.0.0", port=config.ui_port, log_level="warning")
    finally:
        if streamer is not None:
            streamer.stop(drain=True, timeout=5.0)
    return 0


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        config = config_from_args(args)
    except ConfigError as e:
        print(f"bad configuration: {e}", file=sys.stderr)
        return 2

    try:
        if args.mode == "check-config":
            return _mode_check_config(config)
        if args.mode == "loopback":
            return _mode_loopback(config, args)
        if args.mode == "speak-once":
            return _mode_speak_once(config, args)
        if args.mode == "serve":
            return _mode_serve(config, args)
    except KeyboardInterrupt:
        return 0
    except (OSError, ValueError) as e:
        print(f"startup failure: {e}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled mode {args.mode}")


def entrypoint() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
