"""The reference measurement loop, driven entirely over the protocol.

Mirrors the batch workflow: load scenario files, step while vehicles remain,
then read every induction loop and the per-vehicle accounts, serializing both
to the same on-disk formats the batch CLI writes.  Byte equality with the CLI
is part of the contract, so the CSV and XML emitters here reproduce its float
formatting (shortest round-trip ``repr``) and attribute order exactly.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .protocol import ClientConnection

ACCOUNT_FIELDS = (
    "vehicle",
    "co2_mg",
    "fuel_ml",
    "duration_s",
    "travel_time_s",
    "distance_m",
)


@dataclass(frozen=True)
class ScenarioPaths:
    """Scenario input files, resolved by the server process."""

    network: str
    routes: str
    additional: str | None = None
    emissions: str | None = None
    dt: float = 1.0
    t_max: float = 3600.0
    seed: int = 0

    def load_args(self) -> dict[str, Any]:
        args: dict[str, Any] = {
            "network": str(self.network),
            "routes": str(self.routes),
            "dt": self.dt,
            "t_max": self.t_max,
            "seed": self.seed,
        }
        if self.additional is not None:
            args["additional"] = str(self.additional)
        if self.emissions is not None:
            args["emissions"] = str(self.emissions)
        return args


@dataclass
class Algorithm1Summary:
    final_time: float
    steps: int
    times: list[float]
    detector_ids: list[str]
    intervals: list[dict]
    accounts: list[dict]
    files: list[Path] = field(default_factory=list)


def _fmt(value: Any) -> str:
    return repr(float(value))


def accounts_csv(rows: list[dict]) -> str:
    lines = [",".join(ACCOUNT_FIELDS)]
    for row in rows:
        lines.append(
            ",".join([str(row["vehicle"])] + [_fmt(row[k]) for k in ACCOUNT_FIELDS[1:]])
        )
    return "\n".join(lines) + "\n"


def detector_xml(rows: list[dict]) -> bytes:
    root = ET.Element("detector")
    for row in rows:
        ET.SubElement(
            root,
            "interval",
            {
                "begin": _fmt(row["begin"]),
                "end": _fmt(row["end"]),
                "id": str(row["id"]),
                "nVehContrib": str(int(row["nVehContrib"])),
                "meanSpeed": _fmt(row["meanSpeed"]),
                "co2_mg": _fmt(row["co2_mg"]),
                "fuel_ml": _fmt(row["fuel_ml"]),
            },
        )
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def run_algorithm1(
    conn: ClientConnection,
    paths: ScenarioPaths,
    out_dir: str | Path,
    extra_vehicles: list[dict] | None = None,
) -> Algorithm1Summary:
    """Load, loop until no vehicle is expected, collect, and write outputs.

    extra_vehicles are ``vehicle.add`` argument dicts sent right after the
    load, for scenarios generated remotely instead of from a route file.
    Writes ``accounts.csv`` always and ``detectors.xml`` when the scenario
    defines induction loops, like the batch CLI does.  Protocol errors
    propagate with their command context attached.
    """
    conn.call("load", paths.load_args())
    for spec in extra_vehicles or []:
        conn.call("vehicle.add", spec)
    times: list[float] = []
    while conn.call("getMinExpectedNumber") > 0:
        conn.call("step")
        times.append(conn.call("getTime"))
    final_time = times[-1] if times else float(conn.call("getTime"))

    detector_ids = list(conn.call("inductionloop.getIDList"))
    intervals: list[dict] = []
    for det in detector_ids:
        intervals.extend(conn.call("inductionloop.getIntervals", {"id": det}))
    accounts = list(conn.call("getAccounts"))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "accounts.csv"]
    (out / "accounts.csv").write_bytes(accounts_csv(accounts).encode())
    if detector_ids:
        (out / "detectors.xml").write_bytes(detector_xml(intervals))
        written.append(out / "detectors.xml")

    return Algorithm1Summary(
        final_time=final_time,
        steps=len(times),
        times=times,
        detector_ids=detector_ids,
        intervals=intervals,
        accounts=accounts,
        files=written,
    )
