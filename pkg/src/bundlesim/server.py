"""TCP control server: drive a simulation step by step over a socket.

Wire format: every message is a frame of a 4-byte big-endian payload length
followed by that many bytes of UTF-8 JSON.  Requests are objects like

    {"id": 7, "cmd": "step", "args": {"n": 5}}

and every request gets exactly one response frame, either
``{"id": 7, "result": ...}`` or ``{"id": 7, "error": {"code": ...,
"message": ...}}``.  The ``id`` is echoed verbatim (null when absent or
unreadable).  Malformed JSON, unknown commands and bad arguments produce
error responses and keep the connection alive; only an oversized frame
closes it, since the stream can no longer be trusted.

One session is served at a time.  A session owns its world: ``load``
replaces it, ``close`` ends the session and drops it.
"""

from __future__ import annotations

import json
import os
import socket
import struct
import threading
from pathlib import Path

from . import engine
from .emissions import EmissionError
from .net import NetworkError
from .scenario_io import ScenarioFileError, StopCall, VehicleSpec

__all__ = [
    "DEFAULT_PORT",
    "MAX_PAYLOAD",
    "ProtocolError",
    "FrameTooLarge",
    "ConnectionClosed",
    "encode_frame",
    "send_frame",
    "recv_frame",
    "default_port",
    "ControlServer",
]

DEFAULT_PORT = 8813
MAX_PAYLOAD = 16 * 2 ** 20
_HEADER = struct.Struct(">I")

ERR_NO_WORLD = "NoWorldLoaded"
ERR_UNKNOWN_DETECTOR = "UnknownDetector"
ERR_BAD_ARGS = "BadArgs"
ERR_UNKNOWN_COMMAND = "UnknownCommand"
ERR_BAD_PAYLOAD = "BadPayload"
ERR_FRAME_TOO_LARGE = "FrameTooLarge"
ERR_INTERNAL = "InternalError"


class ProtocolError(Exception):
    """Framing-level failure on the wire."""


class FrameTooLarge(ProtocolError):
    pass


class ConnectionClosed(ProtocolError):
    pass


def default_port() -> int:
    """Port from BUNDLESIM_PORT, falling back to the well-known default."""
    raw = os.environ.get("BUNDLESIM_PORT")
    if raw is None:
        return DEFAULT_PORT
    try:
        return int(raw)
    except ValueError:
        return DEFAULT_PORT


def encode_frame(obj) -> bytes:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_PAYLOAD:
        raise FrameTooLarge(f"payload of {len(payload)} bytes exceeds cap")
    return _HEADER.pack(len(payload)) + payload


def send_frame(sock: socket.socket, obj) -> None:
    sock.sendall(encode_frame(obj))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionClosed("peer closed the connection")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> bytes:
    """Read one raw payload; raises on EOF or an oversized declaration."""
    header = _recv_exact(sock, _HEADER.size)
    (length,) = _HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {length} bytes exceeds cap")
    return _recv_exact(sock, length)


def _error(code: str, message: str) -> dict:
    return {"code": code, "message": message}


class _CommandError(Exception):
    """Internal: a handler rejected the request with a structured error."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


class _Session:
    """Per-connection state."""

    def __init__(self) -> None:
        self.world: engine.World | None = None
        self.closing = False


class ControlServer:
    """Single-session TCP control endpoint."""

    def __init__(self, host: str = "127.0.0.1", port: int | None = None) -> None:
        self.host = host
        self.port = port if port is not None else default_port()
        self._listener: socket.socket | None = None
        self._stop = threading.Event()
        self._conn_lock = threading.Lock()
        self._conn: socket.socket | None = None
        self._shutdown_requested = False

    # -- lifecycle -----------------------------------------------------------

    def bind(self) -> int:
        """Create the listening socket; returns the bound port."""
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(1)
        listener.settimeout(0.2)
        self._listener = listener
        self.port = listener.getsockname()[1]
        return self.port

    def serve_forever(self) -> None:
        if self._listener is None:
            self.bind()
        assert self._listener is not None
        try:
            while not self._stop.is_set():
                try:
                    conn, _ = self._listener.accept()
                except socket.timeout:
                    continue
                except OSError:
                    break
                with self._conn_lock:
                    self._conn = conn
                try:
                    self._serve_session(conn)
                finally:
                    with self._conn_lock:
                        self._conn = None
                    try:
                        conn.close()
                    except OSError:
                        pass
                if self._shutdown_requested:
                    break
        finally:
            self.close()

    def shutdown(self) -> None:
        """Stop accepting and tear down any live session."""
        self._stop.set()
        with self._conn_lock:
            conn = self._conn
        if conn is not None:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        self.close()

    def close(self) -> None:
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
            self._listener = None

    # -- session loop ----------------------------------------------------------

    def _serve_session(self, conn: socket.socket) -> None:
        conn.settimeout(600.0)
        session = _Session()
        while not self._stop.is_set() and not session.closing:
            try:
                payload = recv_frame(conn)
            except FrameTooLarge as exc:
                try:
                    send_frame(
                        conn, {"id": None, "error": _error(ERR_FRAME_TOO_LARGE, str(exc))}
                    )
                except OSError:
                    pass
                return
            except (ConnectionClosed, socket.timeout, OSError):
                return
            response = self._respond(session, payload)
            try:
                send_frame(conn, response)
            except OSError:
                return

    def _respond(self, session: _Session, payload: bytes) -> dict:
        try:
            msg = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return {"id": None, "error": _error(ERR_BAD_PAYLOAD, f"bad JSON: {exc}")}
        if not isinstance(msg, dict):
            return {"id": None, "error": _error(ERR_BAD_PAYLOAD, "request must be an object")}
        msg_id = msg.get("id")
        cmd = msg.get("cmd")
        if not isinstance(cmd, str):
            return {"id": msg_id, "error": _error(ERR_BAD_ARGS, "missing command name")}
        args = msg.get("args", {})
        if not isinstance(args, dict):
            return {"id": msg_id, "error": _error(ERR_BAD_ARGS, "args must be an object")}
        handler = self._HANDLERS.get(cmd)
        if handler is None:
            return {
                "id": msg_id,
                "error": _error(ERR_UNKNOWN_COMMAND, f"unknown command {cmd!r}"),
            }
        try:
            result = handler(self, session, args)
        except _CommandError as exc:
            return {"id": msg_id, "error": _error(exc.code, exc.message)}
        except Exception as exc:  # keep the session alive on surprises
            return {"id": msg_id, "error": _error(ERR_INTERNAL, f"{type(exc).__name__}: {exc}")}
        return {"id": msg_id, "result": result}

    # -- argument helpers --------------------------------------------------------

    @staticmethod
    def _need_world(session: _Session) -> engine.World:
        if session.world is None:
            raise _CommandError(ERR_NO_WORLD, "no world loaded; send 'load' first")
        return session.world

    @staticmethod
    def _str_arg(args: dict, name: str) -> str:
        value = args.get(name)
        if not isinstance(value, str):
            raise _CommandError(ERR_BAD_ARGS, f"{name!r} must be a string")
        return value

    @staticmethod
    def _num_arg(args: dict, name: str, default=None) -> float:
        value = args.get(name, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _CommandError(ERR_BAD_ARGS, f"{name!r} must be a number")
        return float(value)

    @staticmethod
    def _read_file(args: dict, name: str, required: bool) -> bytes | None:
        value = args.get(name)
        if value is None:
            if required:
                raise _CommandError(ERR_BAD_ARGS, f"{name!r} path is required")
            return None
        if not isinstance(value, str):
            raise _CommandError(ERR_BAD_ARGS, f"{name!r} must be a path string")
        try:
            return Path(value).read_bytes()
        except OSError as exc:
            raise _CommandError(ERR_BAD_ARGS, f"cannot read {name} file: {exc}") from exc

    # -- commands ---------------------------------------------------------------

    def _cmd_load(self, session: _Session, args: dict) -> dict:
        network_data = self._read_file(args, "network", required=True)
        routes_data = self._read_file(args, "routes", required=True)
        additional_data = self._read_file(args, "additional", required=False)
        emissions_data = self._read_file(args, "emissions", required=False)
        dt = self._num_arg(args, "dt", 1.0)
        t_max = self._num_arg(args, "t_max", 3600.0)
        seed = args.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise _CommandError(ERR_BAD_ARGS, "'seed' must be an integer")
        extra = set(args) - {"network", "routes", "additional", "emissions", "dt", "t_max", "seed"}
        if extra:
            raise _CommandError(ERR_BAD_ARGS, f"unknown load arguments: {sorted(extra)}")
        try:
            config = engine.SimulationConfig(dt=dt, t_max=t_max, seed=seed)
            world = engine.load_scenario(
                network_data, routes_data, additional_data, emissions_data, config
            )
        except (engine.ScenarioError, ScenarioFileError, NetworkError, EmissionError) as exc:
            raise _CommandError(ERR_BAD_ARGS, f"load failed: {exc}") from exc
        session.world = world
        return {"t": world.t, "pending": world.min_expected_number()}

    def _cmd_step(self, session: _Session, args: dict) -> dict:
        world = self._need_world(session)
        n = args.get("n", 1)
        if isinstance(n, bool) or not isinstance(n, int) or not 1 <= n <= 100_000:
            raise _CommandError(ERR_BAD_ARGS, "'n' must be an integer in [1, 100000]")
        for _ in range(n):
            engine.step(world)
        return {"t": world.t}

    def _cmd_get_time(self, session: _Session, args: dict) -> float:
        return self._need_world(session).t

    def _cmd_min_expected(self, session: _Session, args: dict) -> int:
        return self._need_world(session).min_expected_number()

    def _cmd_vehicle_add(self, session: _Session, args: dict) -> dict:
        world = self._need_world(session)
        vid = self._str_arg(args, "id")
        vtype = self._str_arg(args, "type")
        route = self._str_arg(args, "route")
        depart = self._num_arg(args, "depart", 0.0)
        if depart < 0:
            raise _CommandError(ERR_BAD_ARGS, "'depart' must be non-negative")
        raw_stops = args.get("stops", [])
        if not isinstance(raw_stops, list):
            raise _CommandError(ERR_BAD_ARGS, "'stops' must be a list")
        calls = []
        for item in raw_stops:
            if not isinstance(item, dict):
                raise _CommandError(ERR_BAD_ARGS, "each stop must be an object")
            stop_id = item.get("containerStop")
            if not isinstance(stop_id, str):
                raise _CommandError(ERR_BAD_ARGS, "'containerStop' must be a string")
            dwell = item.get("dwell", 90.0)
            if isinstance(dwell, bool) or not isinstance(dwell, (int, float)):
                raise _CommandError(ERR_BAD_ARGS, "'dwell' must be a number")
            calls.append(StopCall(stop_id, float(dwell)))
        spec = VehicleSpec(
            id=vid, vtype=vtype, route=route, depart=depart, stops=tuple(calls)
        )
        try:
            world.add_vehicle(spec)
        except engine.ScenarioError as exc:
            raise _CommandError(ERR_BAD_ARGS, str(exc)) from exc
        return {"ok": True}

    def _cmd_loop_ids(self, session: _Session, args: dict) -> list[str]:
        world = self._need_world(session)
        return sorted(dr.spec.id for dr in world.detectors)

    def _cmd_loop_intervals(self, session: _Session, args: dict) -> list[dict]:
        world = self._need_world(session)
        det_id = self._str_arg(args, "id")
        for dr in world.detectors:
            if dr.spec.id == det_id:
                return [
                    {
                        "begin": iv.begin,
                        "end": iv.end,
                        "id": iv.id,
                        "nVehContrib": iv.n_veh,
                        "meanSpeed": iv.mean_speed,
                        "co2_mg": iv.co2_mg,
                        "fuel_ml": iv.fuel_ml,
                    }
                    for iv in dr.intervals_at(world.t)
                ]
        raise _CommandError(ERR_UNKNOWN_DETECTOR, f"no detector with id {det_id!r}")

    def _cmd_get_accounts(self, session: _Session, args: dict) -> list[dict]:
        return engine.accounts_rows(self._need_world(session))

    def _cmd_close(self, session: _Session, args: dict) -> dict:
        session.world = None
        session.closing = True
        return {"ok": True}

    def _cmd_shutdown(self, session: _Session, args: dict) -> dict:
        session.world = None
        session.closing = True
        self._shutdown_requested = True
        self._stop.set()
        return {"ok": True}

    _HANDLERS = {
        "load": _cmd_load,
        "step": _cmd_step,
        "getTime": _cmd_get_time,
        "getMinExpectedNumber": _cmd_min_expected,
        "vehicle.add": _cmd_vehicle_add,
        "inductionloop.getIDList": _cmd_loop_ids,
        "inductionloop.getIntervals": _cmd_loop_intervals,
        "getAccounts": _cmd_get_accounts,
        "close": _cmd_close,
        "shutdown": _cmd_shutdown,
    }
