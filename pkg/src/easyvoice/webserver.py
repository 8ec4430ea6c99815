"""WebSocket/HTTP front door for the composer session.

One composer, any number of browser tabs: each tab gets its replies, scan
ticks are broadcast to everyone, and /state serves a full snapshot for
late joiners. Synthesis for a speak request runs in a worker thread, so a
slow external engine never freezes the scanning cursor.
"""

from __future__ import annotations

import asyncio
import json
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .service import Composer
from .speech import SynthesisError


class SessionHub:
    """Shared composer plus the set of live websockets.

    Every composer mutation happens in a synchronous block on the event
    loop, so handlers and the tick task interleave only at await points
    and state stays consistent without locks.
    """

    def __init__(self, composer: Composer):
        self.composer = composer
        self.clients: set[WebSocket] = set()

    async def broadcast(self, messages: list[dict]) -> None:
        if not messages:
            return
        dead = []
        for ws in self.clients:
            try:
                for msg in messages:
                    await ws.send_text(json.dumps(msg))
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.clients.discard(ws)

    async def process(self, raw) -> list[dict]:
        """Parse and apply one frame from a client, returning the replies."""
        try:
            if isinstance(raw, bytes):
                raw = raw.decode("utf-8")
            msg = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError):
            return [{"kind": "error", "detail": "frame is not valid JSON"}]
        replies = self.composer.handle(msg)
        req = self.composer.take_pending_speak()
        if req is not None:
            try:
                buf = await asyncio.to_thread(self.composer.synthesizer, req.expanded)
            except (SynthesisError, ValueError) as e:
                replies.extend(self.composer.fail_speak(req, str(e)))
            else:
                replies.extend(self.composer.commit_speak(req, buf))
        return replies

    async def tick_forever(self) -> None:
        period = self.composer.scan_config.scan_period_ms
        while True:
            await asyncio.sleep(period / 1000.0)
            await self.broadcast(self.composer.tick_scanner(period))


def create_app(composer: Composer, *, static_dir: str | None = None,
               auto_tick: bool = True) -> FastAPI:
    hub = SessionHub(composer)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(hub.tick_forever()) if auto_tick else None
        try:
            yield
        finally:
            if task is not None:
                task.cancel()

    app = FastAPI(lifespan=lifespan)
    app.state.hub = hub

    @app.get("/state")
    async def state() -> JSONResponse:
        return JSONResponse(composer.snapshot(include_layout=True))

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        hub.clients.add(ws)
        try:
            await ws.send_text(json.dumps(composer.snapshot(include_layout=True)))
            while True:
                frame = await ws.receive()
                if frame.get("type") == "websocket.disconnect":
                    break
                raw = frame.get("text") if frame.get("text") is not None else frame.get("bytes")
                if raw is None:
                    continue
                for reply in await hub.process(raw):
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            hub.clients.discard(ws)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
