#!/usr/bin/env python3
"""Run the measurement loop against a live server, start to finish.

Start the server first, then point this script at scenario files:

    bundlesim serve --port 8813 &
    bundlesim gen-routes --net net.xml --out generated.rou.xml --seed 42
    python3 scripts/algorithm1_demo.py --net net.xml --routes generated.rou.xml \
        --additional stops.add.xml --out results/

Extra vehicles can be injected over the protocol before stepping with
``--add id,vtype,route,depart`` (repeatable), mirroring remote route
generation via ``vehicle.add`` instead of a pre-built file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from py_client import ClientConnection, ScenarioPaths, default_port, run_algorithm1
from py_client.protocol import CommandError


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--net", required=True, help="network XML file (server-side path)")
    parser.add_argument("--routes", required=True, help="routes XML file (server-side path)")
    parser.add_argument("--additional", help="detectors/stops XML file (server-side path)")
    parser.add_argument("--emissions", help="emission coefficient file (server-side path)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--dt", type=float, default=1.0)
    parser.add_argument("--t-max", type=float, default=3600.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--add",
        action="append",
        default=[],
        metavar="ID,VTYPE,ROUTE,DEPART",
        help="insert an extra vehicle over the protocol before stepping",
    )
    parser.add_argument("--verbose", action="store_true", help="print the clock every step")
    args = parser.parse_args()

    paths = ScenarioPaths(
        network=args.net,
        routes=args.routes,
        additional=args.additional,
        emissions=args.emissions,
        dt=args.dt,
        t_max=args.t_max,
        seed=args.seed,
    )
    port = args.port if args.port is not None else default_port()
    try:
        conn = ClientConnection(args.host, port)
    except OSError as exc:
        print(f"cannot reach server at {args.host}:{port}: {exc}", file=sys.stderr)
        return 1

    extra = []
    for entry in args.add:
        vid, vtype, route, depart = entry.split(",")
        extra.append({"id": vid, "type": vtype, "route": route, "depart": float(depart)})

    with conn:
        try:
            summary = run_algorithm1(conn, paths, args.out, extra_vehicles=extra)
        except CommandError as exc:
            print(f"server rejected {exc.command}: {exc.code}: {exc.message}", file=sys.stderr)
            return 1
        if args.verbose:
            for t in summary.times:
                print(f"t={t}")
        print(f"finished at t={summary.final_time} after {summary.steps} step(s)")
        print(f"detectors: {', '.join(summary.detector_ids) or '(none)'}")
        for row in summary.accounts:
            print(
                f"{row['vehicle']}: co2={row['co2_mg']:.1f} mg fuel={row['fuel_ml']:.1f} ml "
                f"travel_time={row['travel_time_s']:.0f} s distance={row['distance_m']:.0f} m"
            )
        for path in summary.files:
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
