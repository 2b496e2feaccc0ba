"""Thin scripting client for the bundlesim TCP control protocol.

Talks to a running ``bundlesim serve`` process over its wire format (4-byte
big-endian length prefix, UTF-8 JSON payload) and reproduces the reference
measurement loop: load a scenario, step until no vehicles remain, read out
every induction loop, write the detector and account files.  The client does
no simulation work of its own; it only dispatches commands and serializes
what the server reports.
"""

from .protocol import (
    DEFAULT_PORT,
    MAX_PAYLOAD,
    ClientConnection,
    CommandError,
    ConnectionClosed,
    FrameTooLarge,
    ProtocolError,
    connect,
    decode_frames,
    default_port,
    encode_frame,
)
from .algorithm1 import Algorithm1Summary, ScenarioPaths, run_algorithm1

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PORT",
    "MAX_PAYLOAD",
    "ClientConnection",
    "CommandError",
    "ConnectionClosed",
    "FrameTooLarge",
    "ProtocolError",
    "connect",
    "decode_frames",
    "default_port",
    "encode_frame",
    "Algorithm1Summary",
    "ScenarioPaths",
    "run_algorithm1",
    "__version__",
]
