"""Gym-style bindings for a remote flatland session server.

Speaks the newline-delimited JSON protocol (see PROTOCOL.md in the simulator
repository) over TCP; nothing here imports the simulator.  Typical use:

    env = make("127.0.0.1:7788")
    obs = env.reset(seed=7)            # (n_rays, 3) array in [0, 1]
    obs, reward, done, info = env.step(0)
"""

from __future__ import annotations

import json
import socket

import numpy as np

__version__ = "0.1.0"

PROTOCOL_VERSION = 1


class BridgeError(RuntimeError):
    """Transport or protocol failure talking to the session server."""


class ServerError(BridgeError):
    """The server answered with an error message."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class EpisodeOverError(ServerError):
    """step() after the episode finished; reset() is required."""


class RemoteEnv:
    """One remote environment session with reset/step semantics."""

    def __init__(self, sock: socket.socket, hello: dict):
        self._sock = sock
        self._file = sock.makefile("rwb")
        self.protocol_version = hello["version"]
        self.n_rays = int(hello["n_rays"])
        self.n_actions = int(hello["n_actions"])
        self.action_mode = hello.get("action_mode", "discrete3")
        self.episode_length = int(hello["episode_length"])
        self._episode_active = False

    @property
    def observation_shape(self) -> tuple[int, int]:
        return (self.n_rays, 3)

    def _send(self, obj: dict) -> None:
        try:
            self._file.write((json.dumps(obj) + "\n").encode("utf-8"))
            self._file.flush()
        except OSError as exc:
            raise BridgeError(f"connection lost while sending: {exc}") from exc

    def _recv(self) -> dict:
        try:
            line = self._file.readline()
        except OSError as exc:
            raise BridgeError(f"connection lost while reading: {exc}") from exc
        if not line:
            raise BridgeError("server closed the connection")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"unparseable server line: {exc}") from exc
        return msg

    def _request(self, obj: dict) -> dict:
        self._send(obj)
        msg = self._recv()
        if msg.get("type") == "error":
            code = msg.get("code", "unknown")
            if code == "episode_done":
                raise EpisodeOverError(code, msg.get("message", ""))
            raise ServerError(code, msg.get("message", ""))
        return msg

    def _obs_array(self, msg: dict) -> np.ndarray:
        obs = np.asarray(msg["observation"], dtype=np.float64).reshape(self.n_rays, 3)
        return obs

    def apply_config(self, path: str | None = None, inline: dict | None = None) -> None:
        """Replace the session config; a new reset() is required afterwards."""
        payload: dict = {"type": "config"}
        if path is not None:
            payload["path"] = str(path)
        if inline is not None:
            payload["inline"] = inline
        ok = self._request(payload)
        self.n_rays = int(ok["n_rays"])
        self.action_mode = ok.get("action_mode", self.action_mode)
        self.episode_length = int(ok["episode_length"])
        self._episode_active = False

    def reset(self, seed: int | None = None) -> np.ndarray:
        payload: dict = {"type": "reset"}
        if seed is not None:
            payload["seed"] = int(seed)
        msg = self._request(payload)
        self._episode_active = True
        return self._obs_array(msg)

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if not self._episode_active:
            raise BridgeError("reset() must be called before step()")
        if isinstance(action, (tuple, list, np.ndarray)):
            wire_action = [float(action[0]), float(action[1])]
        else:
            wire_action = int(action)
        msg = self._request({"type": "step", "action": wire_action})
        if msg["done"]:
            self._episode_active = False
        info = {"measurements": list(msg["measurements"]), "step": msg["step"]}
        return self._obs_array(msg), float(msg["reward"]), bool(msg["done"]), info

    def request_frame(self, size: int = 256, extent: float | None = None) -> dict:
        payload: dict = {"type": "frame_request", "size": int(size)}
        if extent is not None:
            payload["extent"] = float(extent)
        return self._request(payload)

    def close(self) -> None:
        try:
            self._file.close()
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "RemoteEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _parse_address(address) -> tuple[str, int]:
    if isinstance(address, (tuple, list)):
        return str(address[0]), int(address[1])
    host, _, port = str(address).rpartition(":")
    if not host:
        raise BridgeError(f"address must be host:port, got {address!r}")
    return host, int(port)


def make(address, config_path: str | None = None, config_inline: dict | None = None,
         timeout: float = 30.0) -> RemoteEnv:
    """Connect to a session server and return a ready RemoteEnv.

    `config_path` is resolved by the *server*; pass `config_inline` to ship a
    config object over the wire instead.
    """
    host, port = _parse_address(address)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise BridgeError(f"cannot connect to {host}:{port}: {exc}") from exc
    try:
        # A bare newline identifies the framing and triggers the hello line.
        fh = sock.makefile("rwb")
        fh.write(b"\n")
        fh.flush()
        line = fh.readline()
        if not line:
            raise BridgeError("server closed before hello")
        hello = json.loads(line)
        if hello.get("type") != "hello":
            raise BridgeError(f"expected hello, got {hello.get('type')!r}")
        if hello.get("version") != PROTOCOL_VERSION:
            raise BridgeError(
                f"protocol version mismatch: client {PROTOCOL_VERSION}, "
                f"server {hello.get('version')!r}"
            )
        env = RemoteEnv(sock, hello)
    except (BridgeError, json.JSONDecodeError, OSError):
        sock.close()
        raise
    if config_path is not None or config_inline is not None:
        env.apply_config(path=config_path, inline=config_inline)
    return env
