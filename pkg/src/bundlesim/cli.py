"""Command line interface.

Subcommands:

* ``simulate``   run one scenario from files, write accounts/detector output
* ``compare``    run the bundled-vs-single delivery comparison
* ``gen-routes`` write a randomized route file from insertion probabilities
* ``serve``      expose the engine over the TCP control protocol
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__, compare as compare_mod, engine, scenario_io
from .emissions import EmissionError
from .net import NetworkError
from .scenario_io import GenSpec, ScenarioFileError
from .server import ControlServer, default_port

TRAJECTORY_HEADER = "t,vehicle,edge,offset,speed,accel,co2_rate_mg_s,fuel_rate_ml_s"

_DOMAIN_ERRORS = (
    engine.ScenarioError,
    ScenarioFileError,
    NetworkError,
    EmissionError,
    compare_mod.CompareError,
    OSError,
)


def _accounts_csv(rows: list[dict]) -> str:
    lines = [",".join(engine.ACCOUNT_FIELDS)]
    for row in rows:
        lines.append(
            f"{row['vehicle']},{row['co2_mg']!r},{row['fuel_ml']!r},"
            f"{row['duration_s']!r},{row['travel_time_s']!r},{row['distance_m']!r}"
        )
    return "\n".join(lines) + "\n"


def _trajectories_csv(result: engine.SimulationResult) -> str:
    rows = []
    for vid, points in result.trajectories.items():
        for p in points:
            rows.append((p.t, vid, p))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = [TRAJECTORY_HEADER]
    for t, vid, p in rows:
        lines.append(
            f"{t!r},{vid},{p.edge},{p.offset!r},{p.speed!r},{p.accel!r},"
            f"{p.co2_rate_mg_s!r},{p.fuel_rate_ml_s!r}"
        )
    return "\n".join(lines) + "\n"


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = engine.SimulationConfig(
        dt=args.dt,
        t_max=args.t_max,
        seed=args.seed,
        record_trajectories=args.trajectories,
    )
    world = engine.load_scenario(
        Path(args.net).read_bytes(),
        Path(args.routes).read_bytes(),
        Path(args.additional).read_bytes() if args.additional else None,
        Path(args.emissions).read_bytes() if args.emissions else None,
        config,
    )
    result = engine.run(world)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "accounts.csv").write_bytes(_accounts_csv(engine.accounts_rows(world)).encode())
    if world.detectors:
        (out / "detectors.xml").write_bytes(
            scenario_io.write_detector_output(result.detector_intervals)
        )
    if args.trajectories:
        (out / "trajectories.csv").write_bytes(_trajectories_csv(result).encode())
    status = "truncated at t_max" if result.truncated else "complete"
    print(f"simulated {len(result.accounts)} vehicle(s), t_end={result.t_end} ({status})")
    print(
        f"totals: co2={result.total_co2_mg!r} mg, fuel={result.total_fuel_ml!r} ml"
    )
    print(f"wrote {out}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    network = scenario_io.parse_network_file(Path(args.net).read_bytes())
    cfg = compare_mod.load_comparison_config(args.scenario)
    outcome = compare_mod.run_comparison(network, cfg)
    compare_mod.render_report(outcome, args.out)
    elapsed = time.perf_counter() - started
    rep = outcome.report
    for tot in (rep.scenario_i, rep.scenario_ii):
        print(
            f"{tot.label}: co2={tot.co2_kg:.3f} kg fuel={tot.fuel_l:.3f} l "
            f"travel_time={tot.travel_time_s:.0f} s distance={tot.distance_m:.0f} m"
        )
    print(
        f"reduction: co2={rep.co2_reduction_pct:.1f}% fuel={rep.fuel_reduction_pct:.1f}% "
        f"time_delta={rep.time_delta_s:.0f} s"
    )
    print(f"wrote {args.out} in {elapsed:.2f} s")
    return 0


def _cmd_gen_routes(args: argparse.Namespace) -> int:
    network = scenario_io.parse_network_file(Path(args.net).read_bytes())
    route_edges = tuple(args.route.split(",")) if args.route else None
    spec = GenSpec(
        n_steps=args.steps,
        p_single=args.p_single,
        p_double=args.p_double,
        seed=args.seed,
        route_edges=route_edges,
    )
    payload = scenario_io.generate_route_file(spec, network)
    Path(args.out).write_bytes(payload)
    _, vehicles, _ = scenario_io.parse_routes_file(payload)
    print(f"wrote {args.out} with {len(vehicles)} vehicle(s)")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    server = ControlServer(host=args.host, port=args.port)
    port = server.bind()
    print(f"listening on {args.host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bundlesim",
        description="Deterministic delivery traffic simulation with emission accounting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario from files")
    p_sim.add_argument("--net", required=True, help="network XML file")
    p_sim.add_argument("--routes", required=True, help="routes XML file")
    p_sim.add_argument("--additional", help="detectors and container stops XML file")
    p_sim.add_argument("--emissions", help="emission coefficient file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--dt", type=float, default=1.0, help="step length in seconds")
    p_sim.add_argument("--t-max", type=float, default=3600.0, help="simulation time cap")
    p_sim.add_argument("--seed", type=int, default=0, help="random seed")
    p_sim.add_argument(
        "--trajectories", action="store_true", help="also write per-step trajectories"
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_cmp = sub.add_parser("compare", help="run the two-scenario delivery comparison")
    p_cmp.add_argument("--net", required=True, help="network XML file")
    p_cmp.add_argument("--scenario", required=True, help="comparison config JSON")
    p_cmp.add_argument("--out", required=True, help="output directory")
    p_cmp.set_defaults(func=_cmd_compare)

    p_gen = sub.add_parser("gen-routes", help="generate a randomized route file")
    p_gen.add_argument("--net", required=True, help="network XML file")
    p_gen.add_argument("--out", required=True, help="output route file")
    p_gen.add_argument("--steps", type=int, default=3600, help="number of insertion steps")
    p_gen.add_argument("--p-single", type=float, default=0.1, help="per-step single-trailer probability")
    p_gen.add_argument("--p-double", type=float, default=0.05, help="per-step double-trailer probability")
    p_gen.add_argument("--seed", type=int, default=42, help="random seed")
    p_gen.add_argument("--route", help="comma-separated edge ids (default: main corridor)")
    p_gen.set_defaults(func=_cmd_gen_routes)

    p_srv = sub.add_parser("serve", help="run the TCP control server")
    p_srv.add_argument("--host", default="127.0.0.1", help="bind address")
    p_srv.add_argument(
        "--port",
        type=int,
        default=None,
        help="TCP port (default: BUNDLESIM_PORT or %d)" % default_port(),
    )
    p_srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"bundlesim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
