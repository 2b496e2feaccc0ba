"""Shared fixtures and the acceptance reporting hook."""

from __future__ import annotations

from pathlib import Path

import pytest

from bundlesim import scenario_io
from bundlesim.net import Network

import support


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not support.ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(support.ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[criterion {number}] {verdict} {title}: {detail}")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return support.DATA_DIR


@pytest.fixture(scope="session")
def reference_network() -> Network:
    return scenario_io.parse_network_file(
        (support.DATA_DIR / "linz_reference.net.xml").read_bytes()
    )
