#!/usr/bin/env python3
"""Regenerate the packaged reference scenario files.

Builds the city corridor network (motorway approach, exit ramp, two
stop side loops with equal-length bypasses, one signalized main-street
edge), the two delivery scenarios, the detector/stop definitions and the
comparison config, then writes everything under src/bundlesim/data/.

Run from the repository root:

    python3 scripts/build_reference_data.py [--tl-offset SECONDS]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from bundlesim import compare, scenario_io
from bundlesim.net import (
    Edge,
    Node,
    NodeKind,
    TlsPhase,
    TrafficLightProgram,
    build_network,
)
from bundlesim.scenario_io import (
    DEFAULT_DOUBLE_TRAILER,
    DEFAULT_SINGLE_TRAILER,
    ContainerStopSpec,
    DetectorSpec,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "bundlesim" / "data"

# frozen by scripts/calibrate_signal_offset.py so the bundled truck meets
# the red phase and waits close to 30 s at the stop line
TL_OFFSET = 17.0

CITY_SPEED = 13.89      # 50 km/h
VARIANT_SPEED = 16.67   # 60 km/h
MOTORWAY_SPEED = 22.22  # 80 km/h


def build_reference_network(tl_offset: float, city_speed: float = CITY_SPEED):
    nodes = [
        Node("origin"),
        Node("exit15"),
        Node("c0"),
        Node("c1"),
        Node("s1"),
        Node("c2"),
        Node("tl_node", kind=NodeKind.TRAFFIC_LIGHT, tls_ref="tl_main"),
        Node("c3"),
        Node("s2"),
        Node("c4"),
        Node("end_node"),
    ]
    edges = [
        Edge("mw_approach", "origin", "exit15", 700.0, MOTORWAY_SPEED, priority=13),
        Edge("exit_ramp", "exit15", "c0", 250.0, city_speed, priority=9),
        Edge("a1", "c0", "c1", 300.0, city_speed, priority=10),
        Edge("side_uni_in", "c1", "s1", 80.0, city_speed, priority=3),
        Edge("side_uni_out", "s1", "c2", 80.0, city_speed, priority=3),
        Edge("a1b", "c1", "c2", 160.0, city_speed, priority=10),
        Edge("a2", "c2", "tl_node", 600.0, city_speed, priority=10),
        Edge("a3", "tl_node", "c3", 400.0, city_speed, priority=10),
        Edge("side_dor_in", "c3", "s2", 70.0, city_speed, priority=3),
        Edge("side_dor_out", "s2", "c4", 70.0, city_speed, priority=3),
        Edge("a3b", "c3", "c4", 140.0, city_speed, priority=10),
        Edge("a4", "c4", "end_node", 100.0, city_speed, priority=10),
    ]
    program = TrafficLightProgram(
        id="tl_main",
        controlled=("a2",),
        phases=(
            TlsPhase(30.0, "g"),
            TlsPhase(5.0, "y"),
            TlsPhase(40.0, "r"),
        ),
        offset=tl_offset,
    )
    return build_network(nodes, edges, [program])


STOPS = [
    ContainerStopSpec("spar_university", "side_uni_in", 30.0, 50.0),
    ContainerStopSpec("spar_dornach", "side_dor_in", 25.0, 45.0),
]

DETECTORS = [
    DetectorSpec("loop_city_in", "a1", 150.0, 50.0),
    DetectorSpec("loop_tl", "a2", 590.0, 50.0),
    DetectorSpec("loop_out", "a4", 50.0, 50.0),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tl-offset", type=float, default=TL_OFFSET)
    args = parser.parse_args()

    DATA_DIR.mkdir(parents=True, exist_ok=True)

    network = build_reference_network(args.tl_offset)
    (DATA_DIR / "linz_reference.net.xml").write_bytes(
        scenario_io.write_network_file(network)
    )
    variant = build_reference_network(args.tl_offset, city_speed=VARIANT_SPEED)
    (DATA_DIR / "linz_variant_60.net.xml").write_bytes(
        scenario_io.write_network_file(variant)
    )

    (DATA_DIR / "delivery.add.xml").write_bytes(
        scenario_io.write_additional_file(DETECTORS, STOPS)
    )

    stops = {s.id: s for s in STOPS}
    stop_ids = ("spar_university", "spar_dornach")
    defn_i = compare.build_scenario(
        compare.SCENARIO_I, network, stop_ids, "mw_approach", (0.0,), stops=stops
    )
    defn_ii = compare.build_scenario(
        compare.SCENARIO_II, network, stop_ids, "mw_approach", (0.0, 10.0), stops=stops
    )
    (DATA_DIR / "scenario_I.rou.xml").write_bytes(
        scenario_io.write_routes_file(
            [DEFAULT_SINGLE_TRAILER, DEFAULT_DOUBLE_TRAILER],
            list(defn_i.vehicles),
            list(defn_i.routes),
        )
    )
    (DATA_DIR / "scenario_II.rou.xml").write_bytes(
        scenario_io.write_routes_file(
            [DEFAULT_SINGLE_TRAILER, DEFAULT_DOUBLE_TRAILER],
            list(defn_ii.vehicles),
            list(defn_ii.routes),
        )
    )

    config = {
        "origin_edge": "mw_approach",
        "stops": list(stop_ids),
        "additional_file": "delivery.add.xml",
        "emissions_file": "hbefa_surrogate.emis",
        "depart_bundled": 0.0,
        "departs_single": [0.0, 10.0],
        "dwell_s": 90.0,
        "dt": 1.0,
        "seed": 0,
    }
    (DATA_DIR / "scenario_compare.json").write_text(
        json.dumps(config, indent=2) + "\n"
    )

    for route in defn_i.routes + defn_ii.routes:
        print(f"{route.id}: {' '.join(route.edges)}")
    print(f"wrote reference data to {DATA_DIR} (tl offset {args.tl_offset})")


if __name__ == "__main__":
    main()
