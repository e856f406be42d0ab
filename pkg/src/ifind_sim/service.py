"""Wire service: the live simulation behind a line protocol.

Two listeners share one simulation loop:

* a raw TCP socket speaking newline-delimited JSON (one object per line),
* an HTTP port (TCP port + 1) serving the operator-console bundle and a
  WebSocket endpoint at ``/ws`` carrying the same JSON lines, one per
  message, for browsers.

Every client gets a hello message, then a telemetry frame per tick.
Commands are acknowledged to their submitting client with ``ack`` or
``error``. Slow subscribers drop frames and see one ``gap`` marker per
dropped stretch; the loop never blocks on a client.
"""

from __future__ import annotations

import asyncio
import json
import mimetypes
from pathlib import Path

from .chain import bundled_config_path
from .session import load_questionnaire, save_session
from .sim import Command, Simulator

PROTOCOL_VERSION = 1
QUEUE_LIMIT = 256


def _hello(sim: Simulator) -> dict:
    mesh = sim.mesh
    views = {}
    for name, v in sim.views.items():
        views[name] = {
            "surface_point": [float(x) for x in v.contact.surface_point],
            "normal": [float(x) for x in v.contact.normal],
            "indentation": v.contact.indentation,
        }
    joints = []
    if hasattr(sim.plant, "rig"):
        rig = sim.plant.rig
        spec_list = ([("", rig.gantry)]
                     + [("left.", j) for j in rig.arm_left.joints]
                     + [("right.", j) for j in rig.arm_right.joints])
    else:
        spec_list = [("", j) for j in sim.plant.chain.joints]
    for prefix, j in spec_list:
        joints.append({"id": f"{prefix}{j.id}", "kind": j.kind,
                       "limits": [float(j.limits[0]), float(j.limits[1])],
                       "home": float(j.home)})
    capsule_radii = None
    if hasattr(sim.plant, "rig"):
        capsule_radii = [float(c.radius)
                         for c in sim.plant.rig.capsules_left.capsules]
    return {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "preset": sim.config.plant_name,
        "dt": sim.config.dt,
        "joints": joints,
        "views": views,
        "questions": load_questionnaire(),
        "sweeps": sorted(sim.sweeps),
        "capsule_radii": capsule_radii,
        "mesh": {
            "vertices": [[float(x) for x in v] for v in mesh.vertices],
            "triangles": [[int(i) for i in t] for t in mesh.triangles],
        },
    }


class _Client:
    def __init__(self, name: str):
        self.name = name
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_LIMIT)
        self.gap_pending = False
        self.closed = False

    def offer(self, message: dict):
        """Queue without blocking; overflow turns into one gap marker."""
        if self.closed:
            return
        try:
            if self.gap_pending:
                self.queue.put_nowait({"type": "gap"})
                self.gap_pending = False
            self.queue.put_nowait(message)
        except asyncio.QueueFull:
            self.gap_pending = True


class SimService:
    """One authoritative loop, any number of TCP/WebSocket clients."""

    def __init__(self, sim: Simulator, log_out=None,
                 max_ticks: int | None = None, console_dir=None):
        self.sim = sim
        self.log_out = log_out
        self.max_ticks = max_ticks
        self.console_dir = Path(console_dir) if console_dir else None
        self.clients: set[_Client] = set()
        self.routes: dict[str, _Client] = {}
        self.stopping = asyncio.Event()
        self._client_counter = 0

    # -- shared message handling ---------------------------------------------

    def handle_line(self, client: _Client, line: str):
        try:
            msg = json.loads(line)
            kind = str(msg["kind"])
        except (ValueError, KeyError):
            client.offer({"type": "error", "request_id": "",
                          "error": "ParseError"})
            return
        if kind == "shutdown":
            client.offer({"type": "ack", "request_id":
                          str(msg.get("request_id", ""))})
            self.stopping.set()
            return
        command = Command(kind, dict(msg.get("params", {})),
                          str(msg.get("request_id", "")))
        try:
            request_id = self.sim.submit(command)
        except ValueError as exc:
            client.offer({"type": "error",
                          "request_id": str(msg.get("request_id", "")),
                          "error": "InvalidCommand", "detail": str(exc)})
            return
        self.routes[request_id] = client

    def _broadcast_frame(self, frame: dict, responses):
        message = {"type": "telemetry", **frame}
        message.pop("responses", None)
        for resp in responses:
            client = self.routes.pop(resp.request_id, None)
            if client is not None:
                if resp.ok:
                    client.offer({"type": "ack",
                                  "request_id": resp.request_id,
                                  "tick": frame["tick"]})
                else:
                    client.offer({"type": "error",
                                  "request_id": resp.request_id,
                                  "error": resp.error,
                                  "detail": resp.detail})
        for client in list(self.clients):
            client.offer(message)

    async def loop(self):
        """Advance the sim at the configured tick length until stopped."""
        try:
            while not self.stopping.is_set():
                frame, responses = self.sim.step()
                self._broadcast_frame(frame, responses)
                if self.max_ticks is not None \
                        and self.sim.tick >= self.max_ticks:
                    break
                await asyncio.sleep(self.sim.config.dt)
        finally:
            self.stopping.set()
            if self.log_out:
                save_session(self.sim.log, self.log_out)

    # -- raw TCP ---------------------------------------------------------------

    async def _tcp_client(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter):
        self._client_counter += 1
        client = _Client(f"tcp{self._client_counter}")
        self.clients.add(client)
        client.offer(_hello(self.sim))

        async def sender():
            while not client.closed:
                msg = await client.queue.get()
                writer.write((json.dumps(msg) + "\n").encode())
                await writer.drain()

        send_task = asyncio.create_task(sender())
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.decode().strip()
                if text:
                    self.handle_line(client, text)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            client.closed = True
            send_task.cancel()
            self.clients.discard(client)
            writer.close()

    # -- HTTP static + WebSocket ------------------------------------------------

    async def _ws_client(self, websocket):
        self._client_counter += 1
        client = _Client(f"ws{self._client_counter}")
        self.clients.add(client)
        client.offer(_hello(self.sim))

        async def sender():
            while not client.closed:
                msg = await client.queue.get()
                await websocket.send(json.dumps(msg) + "\n")

        send_task = asyncio.create_task(sender())
        try:
            async for raw in websocket:
                for line in str(raw).splitlines():
                    if line.strip():
                        self.handle_line(client, line.strip())
        except Exception:
            pass
        finally:
            client.closed = True
            send_task.cancel()
            self.clients.discard(client)

    def _static_response(self, path: str):
        from websockets.http11 import Response
        from websockets.datastructures import Headers
        if self.console_dir is None:
            return None
        name = "index.html" if path in ("/", "") else path.lstrip("/")
        target = (self.console_dir / name).resolve()
        if not str(target).startswith(str(self.console_dir.resolve())) \
                or not target.is_file():
            return Response(404, "Not Found", Headers(), b"not found")
        body = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "text/plain"
        headers = Headers()
        headers["Content-Type"] = ctype
        headers["Content-Length"] = str(len(body))
        return Response(200, "OK", headers, body)

    async def serve(self, host: str = "127.0.0.1", port: int = 8787):
        """Run TCP on ``port`` and HTTP/WS on ``port + 1`` until stopped."""
        import websockets

        def process_request(connection, request):
            if request.path != "/ws":
                return self._static_response(request.path)
            return None

        tcp_server = await asyncio.start_server(self._tcp_client, host, port)
        ws_server = await websockets.serve(self._ws_client, host, port + 1,
                                           process_request=process_request)
        loop_task = asyncio.create_task(self.loop())
        try:
            await self.stopping.wait()
        finally:
            loop_task.cancel()
            try:
                await loop_task
            except (asyncio.CancelledError, Exception):
                pass
            tcp_server.close()
            ws_server.close()
            await tcp_server.wait_closed()
            if self.log_out:
                save_session(self.sim.log, self.log_out)


def bundled_console_dir() -> Path | None:
    """Console bundle: shipped package data, or the dev checkout build."""
    candidate = Path(str(bundled_config_path("console", "")))
    if (candidate / "index.html").is_file():
        return candidate
    dev = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if (dev / "index.html").is_file():
        return dev
    return None
