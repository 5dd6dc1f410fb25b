"""Network publication: length-prefixed TCP frames, WebSocket mirror, and
the live-control message protocol.

Frame layout: 4-byte big-endian length, then 1-byte frame type, then a
UTF-8 JSON payload; the length covers the type byte plus the payload.
Publishing is fire-and-forget: with no subscribers, frames are dropped.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from dataclasses import dataclass

from .core import MetricId, ParameterError

FRAME_NETWORK = 0x01
FRAME_TIMING = 0x02
FRAME_ACK = 0x03

MAX_FRAME = 16 * 1024 * 1024


class ControlError(ValueError):
    """Rejected control message."""


def encode_frame(frame_type: int, payload: bytes) -> bytes:
    if 1 + len(payload) > MAX_FRAME:
        raise ParameterError("frame exceeds 16 MiB limit")
    return struct.pack(">IB", len(payload) + 1, frame_type) + payload


def decode_frames(buf: bytes):
    """Split a byte buffer into complete (type, payload) frames; returns
    the frames and the unconsumed remainder."""
    frames = []
    while len(buf) >= 5:
        (length,) = struct.unpack(">I", buf[:4])
        if len(buf) < 4 + length:
            break
        frame_type = buf[4]
        frames.append((frame_type, buf[5:4 + length]))
        buf = buf[4 + length:]
    return frames, buf


def read_frame(sock: socket.socket):
    """Blocking read of one frame from a connected socket."""
    header = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    body = _read_exact(sock, length)
    return body[0], body[1:]


def _read_exact(sock, n):
    chunks = b""
    while len(chunks) < n:
        part = sock.recv(n - len(chunks))
        if not part:
            raise ConnectionError("socket closed mid-frame")
        chunks += part
    return chunks


# ---------------------------------------------------------------------------
# Control messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlMessage:
    """Live-mutable session parameter; applied between trials only."""

    kind: str        # set_metric | set_band | set_threshold |
                     # set_average_count | reset_accumulators
    metric: MetricId | None = None
    lo: int | None = None
    hi: int | None = None
    fraction: float | None = None
    count: int | None = None


def handle_control(raw: str) -> ControlMessage:
    """Parse and validate one control JSON message; unknown fields are
    ignored, invalid values raise ControlError."""
    try:
        obj = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ControlError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or "type" not in obj:
        raise ControlError("control message must be an object with 'type'")
    kind = obj["type"]
    if kind == "set_metric":
        try:
            metric = MetricId.parse(str(obj.get("value", "")))
        except ParameterError as exc:
            raise ControlError(str(exc)) from None
        return ControlMessage("set_metric", metric=metric)
    if kind == "set_band":
        lo, hi = obj.get("lo"), obj.get("hi")
        if (not isinstance(lo, int) or not isinstance(hi, int)
                or lo < 0 or hi < lo):
            raise ControlError(f"invalid band [{lo}, {hi}]")
        return ControlMessage("set_band", lo=lo, hi=hi)
    if kind == "set_threshold":
        v = obj.get("value")
        if not isinstance(v, (int, float)) or not (0.0 < v <= 1.0):
            raise ControlError(f"threshold {v} outside (0, 1]")
        return ControlMessage("set_threshold", fraction=float(v))
    if kind == "set_average_count":
        v = obj.get("value")
        if not isinstance(v, int) or v < 1:
            raise ControlError(f"invalid average count {v}")
        return ControlMessage("set_average_count", count=v)
    if kind == "reset_accumulators":
        return ControlMessage("reset_accumulators")
    raise ControlError(f"unknown control type {kind!r}")


def ack_payload(accepted: bool, kind: str, reason: str = "") -> bytes:
    return json.dumps({"type": "ack", "for": kind, "accepted": accepted,
                       "reason": reason}).encode("utf-8")


# ---------------------------------------------------------------------------
# TCP publisher
# ---------------------------------------------------------------------------

class TcpPublisher:
    """Broadcasts frames to all connected subscribers; drops on none.

    Subscribers may also send control frames (type 0x03 carries the ack
    back on the same connection).
    """

    def __init__(self, port: int, control_sink=None, host: str = "127.0.0.1"):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.port = self._sock.getsockname()[1]
        self._clients: list[socket.socket] = []
        self._lock = threading.Lock()
        self._control_sink = control_sink
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            with self._lock:
                self._clients.append(conn)
            threading.Thread(target=self._client_loop, args=(conn,),
                             daemon=True).start()

    def _client_loop(self, conn):
        buf = b""
        try:
            while not self._stop.is_set():
                part = conn.recv(4096)
                if not part:
                    break
                buf += part
                frames, buf = decode_frames(buf)
                for _, payload in frames:
                    self._handle_control(conn, payload)
        except OSError:
            pass
        finally:
            with self._lock:
                if conn in self._clients:
                    self._clients.remove(conn)
            conn.close()

    def _handle_control(self, conn, payload: bytes):
        try:
            msg = handle_control(payload.decode("utf-8"))
        except ControlError as exc:
            self._send(conn, encode_frame(FRAME_ACK,
                                          ack_payload(False, "?", str(exc))))
            return
        accepted, reason = True, ""
        if self._control_sink is not None:
            accepted, reason = self._control_sink(msg)
        self._send(conn, encode_frame(FRAME_ACK,
                                      ack_payload(accepted, msg.kind, reason)))

    @staticmethod
    def _send(conn, frame: bytes):
        try:
            conn.sendall(frame)
        except OSError:
            pass

    def broadcast(self, frame: bytes):
        with self._lock:
            clients = list(self._clients)
        for conn in clients:
            self._send(conn, frame)

    def close(self):
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        with self._lock:
            for c in self._clients:
                try:
                    c.close()
                except OSError:
                    pass
            self._clients.clear()


# ---------------------------------------------------------------------------
# WebSocket mirror
# ---------------------------------------------------------------------------

class WsMirror:
    """Serves /ws: pushes the same network/timing JSON and accepts control
    JSON, replying with ack objects."""

    def __init__(self, port: int, control_sink=None, host: str = "127.0.0.1"):
        from websockets.sync.server import serve

        self._clients = set()
        self._lock = threading.Lock()
        self._control_sink = control_sink
        self._server = serve(self._handler, host, port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def _handler(self, ws):
        from websockets.exceptions import ConnectionClosed

        if ws.request is not None and ws.request.path not in ("/ws", "/"):
            ws.close(code=1008, reason="unknown path")
            return
        with self._lock:
            self._clients.add(ws)
        try:
            for message in ws:
                if isinstance(message, bytes):
                    message = message.decode("utf-8", errors="replace")
                try:
                    msg = handle_control(message)
                except ControlError as exc:
                    ws.send(ack_payload(False, "?", str(exc)).decode("utf-8"))
                    continue
                accepted, reason = True, ""
                if self._control_sink is not None:
                    accepted, reason = self._control_sink(msg)
                ws.send(ack_payload(accepted, msg.kind, reason).decode("utf-8"))
        except ConnectionClosed:
            pass
        finally:
            with self._lock:
                self._clients.discard(ws)

    def broadcast_json(self, kind: str, payload: str):
        """Send {"frame": kind, "data": <payload>} to every client."""
        text = '{"frame":"%s","data":%s}' % (kind, payload)
        with self._lock:
            clients = list(self._clients)
        for ws in clients:
            try:
                ws.send(text)
            except Exception:
                with self._lock:
                    self._clients.discard(ws)

    def close(self):
        with self._lock:
            clients = list(self._clients)
        for ws in clients:
            try:
                ws.close()
            except Exception:
                pass
        self._server.shutdown()
