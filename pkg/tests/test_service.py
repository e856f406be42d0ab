import asyncio
import json

import pytest

from ifind_sim.service import QUEUE_LIMIT, SimService, _Client, _hello
from ifind_sim.session import load_session
from ifind_sim.sim import SimConfig, Simulator


def make_service(**kwargs):
    sim = Simulator(SimConfig(plant_name="ifind-v2", seed=1, dt=0.001))
    return SimService(sim, **kwargs)


async def read_json(reader):
    line = await asyncio.wait_for(reader.readline(), timeout=10.0)
    assert line, "connection closed"
    return json.loads(line)


async def write_json(writer, obj):
    writer.write((json.dumps(obj) + "\n").encode())
    await writer.drain()


@pytest.fixture()
def port(unused_port_counter=[18950]):
    unused_port_counter[0] += 2
    return unused_port_counter[0]


class TestHelloAndCommands:
    def test_hello_includes_scene(self):
        service = make_service()
        hello = _hello(service.sim)
        assert hello["protocol"] == 1
        assert len(hello["joints"]) == 8
        assert len(hello["questions"]) == 7
        assert len(hello["mesh"]["vertices"]) > 0

    def test_tcp_session_ack_telemetry_estop(self, port, tmp_path):
        asyncio.run(self._tcp_session(port, tmp_path))

    async def _tcp_session(self, port, tmp_path):
        log_path = tmp_path / "session.jsonl"
        service = make_service(log_out=log_path, max_ticks=5000)
        serve_task = asyncio.create_task(service.serve(port=port))
        await asyncio.sleep(0.3)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        hello = await read_json(reader)
        assert hello["type"] == "hello"

        await write_json(writer, {"request_id": "j1", "kind": "jog",
                                  "params": {"joint": "J4", "delta": 0.05}})
        ack = None
        estop_tick = None
        estop_sent = False
        frames = 0
        while frames < 400 and estop_tick is None:
            msg = await read_json(reader)
            if msg["type"] == "ack" and msg["request_id"] == "j1":
                ack = msg
                await write_json(writer, {"request_id": "e1",
                                          "kind": "estop", "params": {}})
                estop_sent = True
            elif msg["type"] == "telemetry":
                frames += 1
                if estop_sent and msg["safety"]["state"] == "ESTOP":
                    estop_tick = msg["tick"]
        assert ack is not None
        assert estop_tick is not None
        # Motion commands bounce while faulted.
        await write_json(writer, {"request_id": "m1", "kind": "home",
                                  "params": {}})
        while True:
            msg = await read_json(reader)
            if msg.get("request_id") == "m1":
                assert msg["type"] == "error"
                assert msg["error"] == "RejectedInFault"
                break
        await write_json(writer, {"request_id": "s1", "kind": "shutdown",
                                  "params": {}})
        await asyncio.wait_for(serve_task, timeout=10.0)
        writer.close()
        log = load_session(log_path)
        assert any(ev.kind == "safety"
                   and ev.payload["state"] == "ESTOP"
                   for ev in log.events)

    def test_two_subscribers_same_frames(self, port):
        asyncio.run(self._two_subscribers(port))

    async def _two_subscribers(self, port):
        service = make_service(max_ticks=5000)
        serve_task = asyncio.create_task(service.serve(port=port))
        await asyncio.sleep(0.2)
        r1, w1 = await asyncio.open_connection("127.0.0.1", port)
        r2, w2 = await asyncio.open_connection("127.0.0.1", port)
        await read_json(r1)
        await read_json(r2)

        async def collect(reader, n):
            out = []
            while len(out) < n:
                msg = await read_json(reader)
                if msg["type"] == "telemetry":
                    out.append(msg)
            return out

        a, b = await asyncio.gather(collect(r1, 10), collect(r2, 10))
        ticks_a = [m["tick"] for m in a]
        ticks_b = [m["tick"] for m in b]
        common = set(ticks_a) & set(ticks_b)
        assert len(common) >= 8
        by_tick_a = {m["tick"]: m for m in a}
        by_tick_b = {m["tick"]: m for m in b}
        for t in common:
            assert by_tick_a[t] == by_tick_b[t]
        service.stopping.set()
        await asyncio.wait_for(serve_task, timeout=5.0)
        w1.close()
        w2.close()

    def test_websocket_carries_same_protocol(self, port):
        asyncio.run(self._websocket_protocol(port))

    async def _websocket_protocol(self, port):
        import websockets

        service = make_service(max_ticks=2000)
        serve_task = asyncio.create_task(service.serve(port=port))
        await asyncio.sleep(0.3)
        async with websockets.connect(
                f"ws://127.0.0.1:{port + 1}/ws") as ws:
            hello = json.loads(await asyncio.wait_for(ws.recv(), 10.0))
            assert hello["type"] == "hello"
            await ws.send(json.dumps({"request_id": "q1",
                                      "kind": "questionnaire",
                                      "params": {"volunteer_id": "w",
                                                 "robot_version": "v2",
                                                 "answers": [4, 3, 2, 4, 4,
                                                             4, 3]}}) + "\n")
            saw_ack = False
            for _ in range(200):
                msg = json.loads(await asyncio.wait_for(ws.recv(), 10.0))
                if msg["type"] == "ack" and msg["request_id"] == "q1":
                    saw_ack = True
                    break
            assert saw_ack
        service.stopping.set()
        await asyncio.wait_for(serve_task, timeout=5.0)
        assert any(ev.kind == "questionnaire"
                   for ev in service.sim.log.events)


class TestGapMarkers:
    def test_overflowing_queue_yields_single_gap_marker(self):
        client = _Client("test")
        for i in range(QUEUE_LIMIT):
            client.offer({"type": "telemetry", "tick": i})
        assert client.queue.qsize() == QUEUE_LIMIT
        client.offer({"type": "telemetry", "tick": QUEUE_LIMIT})
        assert client.gap_pending
        # Drain one slot; the next offer inserts the gap marker first.
        client.queue.get_nowait()
        client.queue.get_nowait()
        client.offer({"type": "telemetry", "tick": QUEUE_LIMIT + 1})
        items = []
        while not client.queue.empty():
            items.append(client.queue.get_nowait())
        # The backlog survives; the gap marker sits between the dropped
        # stretch and the frame that followed it.
        assert items[-2] == {"type": "gap"}
        assert items[-1]["tick"] == QUEUE_LIMIT + 1
        assert not client.gap_pending

    def test_bad_line_reports_parse_error(self):
        service = make_service()
        client = _Client("test")
        service.handle_line(client, "this is not json")
        msg = client.queue.get_nowait()
        assert msg["type"] == "error"
        assert msg["error"] == "ParseError"


class TestStaticConsole:
    def test_http_serves_console_files(self, port, tmp_path):
        asyncio.run(self._serve_static(port, tmp_path))

    async def _serve_static(self, port, tmp_path):
        (tmp_path / "index.html").write_text("<html>console</html>")
        (tmp_path / "main.js").write_text("export {};")
        service = make_service(max_ticks=5000)
        service.console_dir = tmp_path
        serve_task = asyncio.create_task(service.serve(port=port))
        await asyncio.sleep(0.3)

        async def fetch(path):
            reader, writer = await asyncio.open_connection("127.0.0.1",
                                                           port + 1)
            writer.write(f"GET {path} HTTP/1.1\r\nHost: x\r\n"
                         "Connection: close\r\n\r\n".encode())
            await writer.drain()
            data = await asyncio.wait_for(reader.read(), timeout=10.0)
            writer.close()
            return data.decode(errors="replace")

        index = await fetch("/")
        assert "200" in index.splitlines()[0]
        assert "<html>console</html>" in index
        js = await fetch("/main.js")
        assert "export {};" in js
        missing = await fetch("/nope.css")
        assert "404" in missing.splitlines()[0]
        traversal = await fetch("/../secrets")
        assert "404" in traversal.splitlines()[0]
        service.stopping.set()
        await asyncio.wait_for(serve_task, timeout=5.0)
