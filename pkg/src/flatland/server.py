"""Session server: drive one environment per connection over a socket.

A single listening port speaks three framings, distinguished by the first
bytes a client sends:

* newline-delimited JSON over raw TCP (one request line -> one response line),
* WebSocket (HTTP GET upgrade on path ``/ws``), same JSON objects as text
  frames, for browsers,
* plain HTTP GET for anything else, serving the optional static directory
  (the human-play page).

Sessions share nothing; each connection owns a private environment.  See
PROTOCOL.md for the message schema.
"""

from __future__ import annotations

import base64
import hashlib
import json
import socket
import struct
import threading
from pathlib import Path

import numpy as np

from .config import ConfigError, EnvConfig, load_config, parse_config
from .env import Environment, EpisodeDoneError, InvalidActionError
from .sensors import render_topdown

PROTOCOL_VERSION = 1
DEFAULT_PORT = 7788
WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}


class Session:
    """Per-connection protocol state machine (transport-agnostic)."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.env: Environment | None = None
        self.last_step = 0

    def hello(self) -> dict:
        return {
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "n_rays": self.config.sensor.n_rays,
            "n_actions": 3,
            "action_mode": self.config.action_mode,
            "episode_length": self.config.episode_length,
        }

    def handle_line(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error("bad_json", f"malformed JSON: {exc.msg}")
        if not isinstance(msg, dict):
            return _error("bad_json", "message must be a JSON object")
        return self.handle(msg)

    def handle(self, msg: dict) -> dict:
        msg_type = msg.get("type")
        if msg_type == "reset":
            return self._reset(msg)
        if msg_type == "step":
            return self._step(msg)
        if msg_type == "config":
            return self._config(msg)
        if msg_type == "frame_request":
            return self._frame(msg)
        return _error("unknown_type", f"unknown message type {msg_type!r}")

    def _reset(self, msg: dict) -> dict:
        seed = msg.get("seed", self.config.seed)
        if isinstance(seed, bool) or not isinstance(seed, int):
            return _error("invalid_seed", "seed must be an integer")
        self.env = Environment(self.config)
        obs = self.env.reset(seed)
        self.last_step = 0
        return _obs_message(obs, 0.0, False, self.env.measurements(), 0)

    def _step(self, msg: dict) -> dict:
        if self.env is None:
            return _error("no_episode", "reset must be called before step")
        action = msg.get("action")
        if isinstance(action, list):
            action = tuple(action)
        try:
            result = self.env.step(action)
        except EpisodeDoneError as exc:
            return _error("episode_done", str(exc))
        except InvalidActionError as exc:
            return _error("invalid_action", str(exc))
        self.last_step += 1
        return _obs_message(
            result.observation, result.reward, result.done, result.measurements, self.last_step
        )

    def _config(self, msg: dict) -> dict:
        if ("path" in msg) == ("inline" in msg):
            return _error("invalid_config", "config needs exactly one of 'path' or 'inline'")
        try:
            if "path" in msg:
                cfg = load_config(msg["path"])
            else:
                cfg = parse_config(json.dumps(msg["inline"]))
        except (ConfigError, OSError) as exc:
            return _error("invalid_config", str(exc))
        self.config = cfg
        self.env = None
        return {
            "type": "ok",
            "message": "config applied",
            "n_rays": cfg.sensor.n_rays,
            "action_mode": cfg.action_mode,
            "episode_length": cfg.episode_length,
        }

    def _frame(self, msg: dict) -> dict:
        if self.env is None or self.env.state is None:
            return _error("no_episode", "reset must be called before frame_request")
        size = msg.get("size", 256)
        if isinstance(size, bool) or not isinstance(size, int) or not 1 <= size <= 2048:
            return _error("invalid_frame", "size must be an integer in [1, 2048]")
        extent = msg.get("extent", 0.8 * max(self.config.arena))
        state = self.env.state
        img = render_topdown(state.world, state.agent, size, float(extent))
        raw = np.clip(img * 255.0, 0.0, 255.0).astype(np.uint8).tobytes()
        from .sensors import render_rgb

        strip = render_rgb(state.world, state.agent, self.config.sensor)
        return {
            "type": "frame",
            "size": size,
            "topdown": base64.b64encode(raw).decode("ascii"),
            "strip": [float(v) for v in strip.reshape(-1)],
        }


def _obs_message(obs: np.ndarray, reward: float, done: bool, measurements, step: int) -> dict:
    return {
        "type": "obs",
        "observation": [float(v) for v in obs.reshape(-1)],
        "reward": float(reward),
        "done": bool(done),
        "measurements": [float(v) for v in measurements],
        "step": step,
    }


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


class _Reader:
    """Buffered socket reader with peek, line, and exact-count reads."""

    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.buf = b""

    def _fill(self) -> bool:
        chunk = self.conn.recv(65536)
        if not chunk:
            return False
        self.buf += chunk
        return True

    def peek(self, n: int) -> bytes:
        while len(self.buf) < n:
            if not self._fill():
                break
        return self.buf[:n]

    def sniff_http(self) -> bool:
        """True when the connection starts like an HTTP request.

        Decides from the first byte when it already rules HTTP out, so JSON
        clients that open with a bare newline probe are not kept waiting.
        """
        prefixes = (b"GET ", b"HEAD", b"POST")
        while True:
            if self.buf and not any(p.startswith(self.buf[:1]) for p in prefixes):
                return False
            if len(self.buf) >= 4:
                return self.buf[:4] in prefixes
            if not self._fill():
                return False

    def read_line(self, limit: int = 16 * 1024 * 1024) -> bytes | None:
        while b"\n" not in self.buf:
            if len(self.buf) > limit:
                raise ValueError("line too long")
            if not self._fill():
                return None
        line, self.buf = self.buf.split(b"\n", 1)
        return line

    def read_exact(self, n: int) -> bytes | None:
        while len(self.buf) < n:
            if not self._fill():
                return None
        out, self.buf = self.buf[:n], self.buf[n:]
        return out


class SessionServer:
    def __init__(
        self,
        config: EnvConfig,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        static_dir: Path | None = None,
    ):
        self.config = config
        self.host = host
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(16)
        self.port = self._sock.getsockname()[1]
        self._running = False
        self._threads: list[threading.Thread] = []

    def serve_forever(self) -> None:
        self._running = True
        while self._running:
            try:
                conn, addr = self._sock.accept()
            except OSError:
                break
            thread = threading.Thread(target=self._client, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def close(self) -> None:
        self._running = False
        try:
            self._sock.close()
        except OSError:
            pass

    # -- per-connection ------------------------------------------------------

    def _client(self, conn: socket.socket) -> None:
        session = Session(self.config)
        reader = _Reader(conn)
        try:
            if not reader.peek(1):
                return
            if reader.sniff_http():
                self._http(conn, reader, session)
            else:
                self._ndjson(conn, reader, session)
        except (ConnectionError, ValueError, OSError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _ndjson(self, conn: socket.socket, reader: _Reader, session: Session) -> None:
        conn.sendall(_encode_line(session.hello()))
        while True:
            line = reader.read_line()
            if line is None:
                return
            text = line.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            conn.sendall(_encode_line(session.handle_line(text)))

    # -- HTTP / WebSocket ----------------------------------------------------

    def _http(self, conn: socket.socket, reader: _Reader, session: Session) -> None:
        request_line = reader.read_line()
        if request_line is None:
            return
        parts = request_line.decode("latin-1").strip().split()
        if len(parts) < 3:
            return
        method, path = parts[0], parts[1]
        headers: dict[str, str] = {}
        while True:
            line = reader.read_line()
            if line is None:
                return
            line = line.strip(b"\r")
            if not line:
                break
            if b":" in line:
                key, _, value = line.decode("latin-1").partition(":")
                headers[key.strip().lower()] = value.strip()

        if path.split("?")[0] == "/ws" and "websocket" in headers.get("upgrade", "").lower():
            self._websocket(conn, reader, session, headers)
            return
        self._static(conn, method, path.split("?")[0])

    def _static(self, conn: socket.socket, method: str, path: str) -> None:
        if self.static_dir is None:
            _http_response(conn, 404, b"no static directory configured\n")
            return
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir)) or not target.is_file():
            _http_response(conn, 404, b"not found\n")
            return
        body = target.read_bytes() if method != "HEAD" else b""
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        _http_response(conn, 200, body, ctype)

    def _websocket(
        self, conn: socket.socket, reader: _Reader, session: Session, headers: dict[str, str]
    ) -> None:
        key = headers.get("sec-websocket-key")
        if not key:
            _http_response(conn, 400, b"missing Sec-WebSocket-Key\n")
            return
        accept = base64.b64encode(hashlib.sha1((key + WS_GUID).encode("ascii")).digest()).decode()
        conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("ascii")
        )
        _ws_send(conn, json.dumps(session.hello()))
        fragments: list[bytes] = []
        while True:
            frame = _ws_read_frame(reader)
            if frame is None:
                return
            fin, opcode, payload = frame
            if opcode == 0x8:  # close
                try:
                    conn.sendall(_ws_encode(0x8, payload[:125]))
                finally:
                    return
            if opcode == 0x9:  # ping
                conn.sendall(_ws_encode(0xA, payload))
                continue
            if opcode == 0xA:  # pong
                continue
            fragments.append(payload)
            if not fin:
                continue
            text = b"".join(fragments).decode("utf-8", errors="replace")
            fragments = []
            _ws_send(conn, json.dumps(session.handle_line(text)))


def _encode_line(obj: dict) -> bytes:
    return (json.dumps(obj) + "\n").encode("utf-8")


def _http_response(conn: socket.socket, status: int, body: bytes, ctype: str = "text/plain") -> None:
    reason = {200: "OK", 400: "Bad Request", 404: "Not Found"}.get(status, "Error")
    head = (
        f"HTTP/1.1 {status} {reason}\r\n"
        f"Content-Type: {ctype}\r\n"
        f"Content-Length: {len(body)}\r\n"
        "Connection: close\r\n\r\n"
    )
    conn.sendall(head.encode("ascii") + body)


def _ws_read_frame(reader: _Reader) -> tuple[bool, int, bytes] | None:
    head = reader.read_exact(2)
    if head is None:
        return None
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        ext = reader.read_exact(2)
        if ext is None:
            return None
        length = struct.unpack(">H", ext)[0]
    elif length == 127:
        ext = reader.read_exact(8)
        if ext is None:
            return None
        length = struct.unpack(">Q", ext)[0]
    if length > 64 * 1024 * 1024:
        raise ValueError("websocket frame too large")
    mask = b"\x00\x00\x00\x00"
    if masked:
        mask_bytes = reader.read_exact(4)
        if mask_bytes is None:
            return None
        mask = mask_bytes
    payload = reader.read_exact(length) if length else b""
    if payload is None:
        return None
    if masked and length:
        key = np.frombuffer(mask * (length // 4 + 1), dtype=np.uint8)[:length]
        payload = (np.frombuffer(payload, dtype=np.uint8) ^ key).tobytes()
    return fin, opcode, payload


def _ws_encode(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _ws_send(conn: socket.socket, text: str) -> None:
    conn.sendall(_ws_encode(0x1, text.encode("utf-8")))
