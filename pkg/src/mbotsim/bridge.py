"""Live bridge: wire protocol plus the WebSocket service around the engine.

Frames are single-line JSON texts: {"body": {...}, "seq": N, "type": "..."}
with types hello, state, topic, teleop, control, and error.  Encoding is
canonical (sorted keys, no spaces), so decode-then-encode reproduces corpus
lines byte for byte.  The server paces simulation time against the wall
clock (--speed multiplier; 0 means free-running), broadcasts state at a
fixed cadence with newest-wins dropping for slow clients, and forwards
teleop and control frames to the engine, which drains them at step starts.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass

from .bus import ByteStub
from .core import Twist2D
from .engine import Engine, Snapshot, load_scenario

log = logging.getLogger("mbotsim.bridge")

FRAME_TYPES = ("hello", "state", "topic", "teleop", "control", "error")

DEFAULT_BROADCAST_HZ = 20.0


class WireDecodeError(ValueError):
    """Malformed frame text; offset is the byte position of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownFrameTypeError(ValueError):
    def __init__(self, frame_type: str):
        super().__init__(f"unknown frame type {frame_type!r}")
        self.frame_type = frame_type


@dataclass(frozen=True)
class WireFrame:
    type: str
    seq: int
    body: dict


@dataclass(frozen=True)
class TeleopCommand:
    robot: str
    v: float
    w: float
    stamp: float


def _canonical_numbers(value):
    # Integral floats are encoded as integers so the canonical form is
    # language-neutral (JavaScript cannot produce "20.0").
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return int(value)
    if isinstance(value, dict):
        return {k: _canonical_numbers(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical_numbers(v) for v in value]
    return value


def encode_frame(frame: WireFrame) -> str:
    """Canonical single-line encoding of a frame."""
    return json.dumps(
        {"body": _canonical_numbers(frame.body), "seq": frame.seq, "type": frame.type},
        sort_keys=True,
        separators=(",", ":"),
    )


def decode_frame(text: str) -> WireFrame:
    """Parse one frame line.  Unknown body fields pass through untouched;
    unknown top-level fields are ignored for forward compatibility."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WireDecodeError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(obj, dict):
        raise WireDecodeError("frame must be a JSON object")
    frame_type = obj.get("type")
    if not isinstance(frame_type, str):
        raise WireDecodeError("missing or non-string 'type'")
    if frame_type not in FRAME_TYPES:
        raise UnknownFrameTypeError(frame_type)
    seq = obj.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise WireDecodeError("missing or non-integer 'seq'")
    body = obj.get("body", {})
    if not isinstance(body, dict):
        raise WireDecodeError("'body' must be an object")
    return WireFrame(frame_type, seq, body)


def parse_teleop(frame: WireFrame) -> TeleopCommand:
    body = frame.body
    robot = body.get("robot")
    if not isinstance(robot, str):
        raise WireDecodeError("teleop body needs a 'robot' name")
    try:
        v = float(body.get("v", 0.0))
        w = float(body.get("w", 0.0))
        stamp = float(body.get("stamp", 0.0))
    except (TypeError, ValueError) as exc:
        raise WireDecodeError(f"teleop body has non-numeric fields: {exc}") from exc
    return TeleopCommand(robot, v, w, stamp)


def _payload_json(payload):
    if isinstance(payload, Twist2D):
        return {"v": payload.v, "w": payload.w}
    if isinstance(payload, ByteStub):
        return {"length": payload.length, "checksum": payload.checksum}
    return list(payload)


def state_body(snap: Snapshot, paused: bool, dropped: int) -> dict:
    return {
        "t": snap.t,
        "step": snap.step,
        "paused": paused,
        "done": snap.done,
        "dropped": dropped,
        "robots": [
            {
                "name": r.name,
                "x": r.x,
                "y": r.y,
                "theta": r.theta,
                "led": list(r.led),
                "tof": list(r.tof),
                "line": list(r.line),
                "v": r.v,
                "w": r.w,
            }
            for r in snap.robots
        ],
    }


class BridgeServer:
    """One engine thread plus one WebSocket handler thread per client.

    The engine is the sole writer of simulation state; clients see immutable
    snapshots.  A run with no teleop input steps exactly like a plain run of
    the same scenario.
    """

    def __init__(
        self,
        scenario_source,
        host: str = "127.0.0.1",
        port: int = 8765,
        speed: float = 1.0,
        broadcast_hz: float = DEFAULT_BROADCAST_HZ,
    ):
        self.engine: Engine = load_scenario(scenario_source)
        self._scenario_source = scenario_source
        self.host = host
        self.port = port
        self.speed = speed
        self.broadcast_hz = broadcast_hz
        self.paused = False
        self._reset_requested = False
        self._stop = threading.Event()
        self._done = threading.Event()
        self._snap_lock = threading.Lock()
        self._snapshot: Snapshot = self.engine.snapshot()
        self._ws_server = None
        self._threads: list[threading.Thread] = []

    # -- engine side --------------------------------------------------------

    def latest_snapshot(self) -> tuple[Snapshot, bool]:
        with self._snap_lock:
            return self._snapshot, self.paused

    def _publish_snapshot(self) -> None:
        snap = self.engine.snapshot()
        with self._snap_lock:
            self._snapshot = snap

    def _engine_loop(self) -> None:
        interval = 1.0 / self.broadcast_hz
        wall_origin = time.monotonic()
        sim_offset = 0.0  # sim time already accounted to wall_origin
        while not self._stop.is_set():
            if self._reset_requested:
                self._reset_requested = False
                self.engine = load_scenario(self._scenario_source)
                self._done.clear()
                wall_origin = time.monotonic()
                sim_offset = 0.0
                self._publish_snapshot()
                continue
            if self.paused:
                wall_origin = time.monotonic()
                sim_offset = self.engine.clock
                self._publish_snapshot()
                time.sleep(0.005)
                continue
            if self.engine.done:
                self._done.set()
                self._publish_snapshot()
                time.sleep(0.02)
                continue
            if self.speed > 0:
                # Cap the simulation lead over the wall clock at one
                # broadcast interval to keep teleop latency bounded.
                target = sim_offset + (time.monotonic() - wall_origin) * self.speed
                horizon = target + interval * self.speed
                if self.engine.clock >= horizon:
                    time.sleep(min(0.005, interval / 4))
                    continue
                while not self.engine.done and self.engine.clock < horizon:
                    self.engine.step()
                    if self.engine.clock >= target:
                        break
            else:
                for _ in range(200):
                    if self.engine.done:
                        break
                    self.engine.step()
            self._publish_snapshot()

    # -- client side ----------------------------------------------------------

    def _hello_frame(self, seq: int) -> WireFrame:
        eng = self.engine
        return WireFrame("hello", seq, {
            "scenario": eng.scenario.name,
            "robots": eng.robot_names(),
            "world": eng.world_summary(),
            "dt": eng.dt,
            "duration": eng.duration,
            "speed": self.speed,
            "broadcast_hz": self.broadcast_hz,
        })

    def _handle_client(self, conn) -> None:
        out_seq = 0
        send_lock = threading.Lock()

        def send(frame_type: str, body: dict) -> None:
            nonlocal out_seq
            with send_lock:
                out_seq += 1
                conn.send(encode_frame(WireFrame(frame_type, out_seq, body)))

        send("hello", self._hello_frame(1).body)
        closed = threading.Event()
        last_in_seq = [0]

        def broadcaster():
            interval = 1.0 / self.broadcast_hz
            next_tick = time.monotonic() + interval
            dropped = 0
            last_step = -1
            while not closed.is_set() and not self._stop.is_set():
                now = time.monotonic()
                if now < next_tick:
                    time.sleep(min(interval, next_tick - now))
                    continue
                missed = int((now - next_tick) // interval)
                dropped += missed
                next_tick += interval * (missed + 1)
                snap, paused = self.latest_snapshot()
                if snap.step == last_step and not paused:
                    continue
                try:
                    for msg in snap.watched:
                        send("topic", {"topic": msg.topic, "stamp": msg.stamp,
                                       "payload": _payload_json(msg.payload)})
                    send("state", state_body(snap, paused, dropped))
                except Exception:
                    closed.set()
                    return
                dropped = 0
                last_step = snap.step

        sender = threading.Thread(target=broadcaster, daemon=True)
        sender.start()
        try:
            for text in conn:
                self._handle_incoming(text, send, last_in_seq)
        except Exception as exc:
            log.debug("client connection ended: %s", exc)
        finally:
            closed.set()

    def _handle_incoming(self, text, send, last_in_seq) -> None:
        if isinstance(text, bytes):
            text = text.decode("utf-8", errors="replace")
        try:
            frame = decode_frame(text)
        except UnknownFrameTypeError as exc:
            send("error", {"code": "unknown_type", "message": str(exc)})
            return
        except WireDecodeError as exc:
            send("error", {"code": "decode_error", "message": str(exc),
                           "offset": exc.offset})
            return
        if frame.seq <= last_in_seq[0]:
            send("error", {"code": "seq_regression",
                           "message": f"seq {frame.seq} not above {last_in_seq[0]}"})
            return
        last_in_seq[0] = frame.seq
        if frame.type == "teleop":
            try:
                cmd = parse_teleop(frame)
            except WireDecodeError as exc:
                send("error", {"code": "bad_teleop", "message": str(exc)})
                return
            self.engine.inject_teleop(cmd.robot, cmd.v, cmd.w)
        elif frame.type == "control":
            body = frame.body
            if "pause" in body:
                self.paused = bool(body["pause"])
            if body.get("reset"):
                self._reset_requested = True
            if isinstance(body.get("watch"), str):
                self.engine.request_watch(body["watch"])
        elif frame.type in ("hello", "state", "topic"):
            send("error", {"code": "unexpected_type",
                           "message": f"clients do not send {frame.type!r} frames"})

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> None:
        """Bind the socket and start the engine and accept threads."""
        from websockets.sync.server import serve

        self._ws_server = serve(self._handle_client, self.host, self.port)
        self.port = self._ws_server.socket.getsockname()[1]
        engine_thread = threading.Thread(target=self._engine_loop, daemon=True)
        engine_thread.start()
        accept_thread = threading.Thread(target=self._ws_server.serve_forever, daemon=True)
        accept_thread.start()
        self._threads = [engine_thread, accept_thread]
        log.info("bridge serving ws://%s:%d", self.host, self.port)

    def wait_done(self, timeout: float | None = None) -> bool:
        """Block until the scenario has run to its duration."""
        return self._done.wait(timeout)

    def shutdown(self) -> None:
        self._stop.set()
        if self._ws_server is not None:
            self._ws_server.shutdown()
        for t in self._threads:
            t.join(timeout=2.0)

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.shutdown()
