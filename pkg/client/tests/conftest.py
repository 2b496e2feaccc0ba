"""Client test fixtures: a live server subprocess and acceptance reporting.

The client is exercised only through external interfaces: the TCP protocol
of a real ``bundlesim serve`` process and the on-disk file formats.  Nothing
in this suite imports the simulator package.
"""

from __future__ import annotations

import re
import subprocess
import sys
import time
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
DATA_DIR = REPO_ROOT / "src" / "bundlesim" / "data"

ACCEPTANCE_RESULTS: list[tuple[str, str, bool, str]] = []


def record_acceptance(number: str, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria (client)")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[criterion {number}] {verdict} {title}: {detail}")


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


class ServerProcess:
    def __init__(self) -> None:
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "bundlesim.cli", "serve", "--host", "127.0.0.1", "--port", "0"],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        line = self.proc.stdout.readline()
        match = re.search(r"listening on 127\.0\.0\.1:(\d+)", line)
        if not match:
            self.stop()
            raise RuntimeError(f"server did not report a port: {line!r}")
        self.port = int(match.group(1))

    def stop(self) -> None:
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait(timeout=5)


@pytest.fixture(scope="session")
def server():
    srv = ServerProcess()
    # the socket is already bound once the port line is printed
    yield srv
    srv.stop()


@pytest.fixture(scope="session")
def server_port(server) -> int:
    return server.port


def wait_alive(port: int, timeout: float = 5.0) -> None:
    import socket

    deadline = time.monotonic() + timeout
    while True:
        try:
            socket.create_connection(("127.0.0.1", port), timeout=1.0).close()
            return
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)
