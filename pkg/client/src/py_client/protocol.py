"""Wire protocol: framing, a blocking connection, and error surfacing.

Every request is one frame and receives exactly one response frame.  A frame
is a 4-byte big-endian payload length followed by that many bytes of UTF-8
JSON.  Requests carry a client-chosen correlation id which the server echoes;
the connection enforces that echo and hands structured server errors to the
caller as :class:`CommandError` with the originating command attached.
"""

from __future__ import annotations

import json
import os
import socket
import struct
from typing import Any, Iterator

DEFAULT_PORT = 8813
MAX_PAYLOAD = 16 * 2 ** 20
_HEADER = struct.Struct(">I")


class ProtocolError(Exception):
    """Framing- or session-level failure on the wire."""


class FrameTooLarge(ProtocolError):
    pass


class ConnectionClosed(ProtocolError):
    pass


class CommandError(ProtocolError):
    """A structured error response, re-raised with command context."""

    def __init__(self, command: str, code: str, message: str) -> None:
        super().__init__(f"{command}: {code}: {message}")
        self.command = command
        self.code = code
        self.message = message


def default_port() -> int:
    """Port from BUNDLESIM_PORT, falling back to the well-known default."""
    raw = os.environ.get("BUNDLESIM_PORT")
    if raw is None:
        return DEFAULT_PORT
    try:
        return int(raw)
    except ValueError:
        return DEFAULT_PORT


def encode_frame(payload: Any) -> bytes:
    data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    if len(data) > MAX_PAYLOAD:
        raise FrameTooLarge(f"payload of {len(data)} bytes exceeds {MAX_PAYLOAD}")
    return _HEADER.pack(len(data)) + data


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            raise ConnectionClosed("peer closed the connection")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> bytes:
    (length,) = _HEADER.unpack(_recv_exact(sock, _HEADER.size))
    if length > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    return _recv_exact(sock, length)


def decode_frames(data: bytes) -> Iterator[Any]:
    """Split a byte buffer into decoded payloads (for tests and captures)."""
    view = memoryview(data)
    while view:
        if len(view) < _HEADER.size:
            raise ProtocolError("trailing bytes shorter than a frame header")
        (length,) = _HEADER.unpack(view[: _HEADER.size])
        end = _HEADER.size + length
        if len(view) < end:
            raise ProtocolError("frame truncated")
        yield json.loads(bytes(view[_HEADER.size:end]))
        view = view[end:]


class ClientConnection:
    """One blocking request/response session with the control server.

    Correlation ids are strictly increasing per connection, starting at 1.
    """

    def __init__(self, host: str, port: int, timeout: float | None = 30.0) -> None:
        self.host = host
        self.port = port
        self.sock: socket.socket | None = socket.create_connection(
            (host, port), timeout=timeout
        )
        self.next_id = 0

    def call(self, cmd: str, args: dict | None = None) -> Any:
        """Send one command, return its result or raise CommandError."""
        if self.sock is None:
            raise ConnectionClosed(f"{cmd}: connection already closed")
        self.next_id += 1
        request: dict[str, Any] = {"id": self.next_id, "cmd": cmd}
        if args is not None:
            request["args"] = args
        self.sock.sendall(encode_frame(request))
        reply = json.loads(recv_frame(self.sock))
        if not isinstance(reply, dict):
            raise ProtocolError(f"{cmd}: non-object response {reply!r}")
        if reply.get("id") != request["id"]:
            raise ProtocolError(
                f"{cmd}: response id {reply.get('id')!r} does not match {request['id']}"
            )
        if "error" in reply:
            err = reply["error"] or {}
            raise CommandError(cmd, str(err.get("code")), str(err.get("message")))
        return reply.get("result")

    def close(self) -> None:
        """End the session politely, then drop the socket. Safe to call twice."""
        if self.sock is None:
            return
        try:
            self.call("close")
        except (ProtocolError, OSError):
            pass
        finally:
            self.sock.close()
            self.sock = None

    def __enter__(self) -> "ClientConnection":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def connect(host: str = "127.0.0.1", port: int | None = None) -> ClientConnection:
    """Open a connection; surfaces socket errors unchanged, never retries."""
    return ClientConnection(host, port if port is not None else default_port())
