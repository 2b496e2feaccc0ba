"""Two-scenario delivery tour comparison.

Scenario I sends one double-trailer truck on a bundled tour over all
container stops; scenario II sends one single-trailer truck per stop.  Both
run on the same network with the same stop dwell time, and the report puts
their emission totals side by side.

Routes are built by shortest path over the edge graph, from a common origin
edge through the stop edges to the nearest sink.  Edges carrying a container
stop are raised to main-street priority so delivery access is never routed
around.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path

from . import engine, scenario_io
from .emissions import load_emission_classes
from .engine import SimulationConfig, SimulationResult
from .net import MAIN_STREET_PRIORITY, Network, Route, set_edge_priority
from .scenario_io import (
    DEFAULT_DOUBLE_TRAILER,
    DEFAULT_DWELL_S,
    DEFAULT_SINGLE_TRAILER,
    VCLASS_DOUBLE,
    VCLASS_SINGLE,
    ContainerStopSpec,
    StopCall,
    VehicleSpec,
    VehicleTypeSpec,
)

__all__ = [
    "CompareError",
    "BadScenario",
    "NoPath",
    "IncompleteResult",
    "SCENARIO_I",
    "SCENARIO_II",
    "ScenarioDefinition",
    "ScenarioTotals",
    "ScenarioReport",
    "ComparisonConfig",
    "ComparisonOutcome",
    "shortest_edge_path",
    "path_to_sink",
    "build_scenario",
    "compare",
    "load_comparison_config",
    "run_comparison",
    "render_report",
    "REPORT_HEADER",
    "TIMESERIES_HEADER",
]

SCENARIO_I = "scenario_I"
SCENARIO_II = "scenario_II"

REPORT_HEADER = "scenario,co2_kg,fuel_l,travel_time_s,distance_m"
TIMESERIES_HEADER = "t,vehicle,rate"


class CompareError(Exception):
    """Base class for comparison setup and reporting errors."""


class BadScenario(CompareError):
    pass


class NoPath(CompareError):
    pass


class IncompleteResult(CompareError):
    pass


@dataclass(frozen=True)
class ScenarioDefinition:
    """Everything needed to run one scenario: who drives where, and when."""

    label: str
    network: Network
    vtypes: tuple[VehicleTypeSpec, ...]
    routes: tuple[Route, ...]
    vehicles: tuple[VehicleSpec, ...]


@dataclass(frozen=True)
class ScenarioTotals:
    label: str
    co2_kg: float
    fuel_l: float
    travel_time_s: float
    distance_m: float


@dataclass(frozen=True)
class ScenarioReport:
    scenario_i: ScenarioTotals
    scenario_ii: ScenarioTotals
    co2_reduction_pct: float
    fuel_reduction_pct: float
    time_delta_s: float


# -- routing ----------------------------------------------------------------


def shortest_edge_path(network: Network, from_edge: str, to_edge: str) -> tuple[str, ...]:
    """Shortest edge sequence from one edge to another, both included.

    Distance counts the lengths of the edges after the first, so staying on
    the starting edge costs nothing.
    """
    network.edge(from_edge)
    network.edge(to_edge)
    if from_edge == to_edge:
        return (from_edge,)
    dist, prev = _dijkstra(network, from_edge)
    if to_edge not in dist:
        raise NoPath(f"no path from edge {from_edge!r} to {to_edge!r}")
    return _unwind(prev, from_edge, to_edge)


def path_to_sink(network: Network, from_edge: str) -> tuple[str, ...]:
    """Shortest path from an edge to the nearest sink edge (no outgoing)."""
    network.edge(from_edge)
    dist, prev = _dijkstra(network, from_edge)
    sinks = [
        eid
        for eid in dist
        if not network.outgoing.get(network.edges[eid].to_node)
    ]
    if not sinks:
        raise NoPath(f"no sink edge reachable from {from_edge!r}")
    target = min(sinks, key=lambda eid: (dist[eid], eid))
    return _unwind(prev, from_edge, target)


def _dijkstra(network: Network, source: str) -> tuple[dict[str, float], dict[str, str]]:
    dist = {source: 0.0}
    prev: dict[str, str] = {}
    heap = [(0.0, source)]
    done: set[str] = set()
    while heap:
        d, eid = heapq.heappop(heap)
        if eid in done:
            continue
        done.add(eid)
        edge = network.edges[eid]
        for nxt in network.outgoing.get(edge.to_node, ()):
            nd = d + network.edges[nxt].length
            if nxt not in dist or nd < dist[nxt]:
                dist[nxt] = nd
                prev[nxt] = eid
                heapq.heappush(heap, (nd, nxt))
    return dist, prev


def _unwind(prev: dict[str, str], source: str, target: str) -> tuple[str, ...]:
    path = [target]
    while path[-1] != source:
        path.append(prev[path[-1]])
    path.reverse()
    return tuple(path)


# -- scenario construction ----------------------------------------------------


def build_scenario(
    label: str,
    network: Network,
    stop_ids: tuple[str, ...],
    origin_edge: str,
    depart_times: tuple[float, ...],
    *,
    stops: dict[str, ContainerStopSpec],
    vtypes: dict[str, VehicleTypeSpec] | None = None,
    dwell: float = DEFAULT_DWELL_S,
) -> ScenarioDefinition:
    """Build one scenario's vehicles and routes.

    With a single depart time, one double-trailer vehicle serves every stop
    in order (the bundled tour).  With one depart time per stop, each stop
    gets its own single-trailer vehicle.  Stop edges below main-street
    priority are raised so access is part of the through network.
    """
    if not stop_ids:
        raise BadScenario("at least one container stop is required")
    for sid in stop_ids:
        if sid not in stops:
            raise BadScenario(f"container stop {sid!r} is not defined")
    type_map = vtypes or {
        VCLASS_SINGLE: DEFAULT_SINGLE_TRAILER,
        VCLASS_DOUBLE: DEFAULT_DOUBLE_TRAILER,
    }

    for sid in stop_ids:
        edge = network.edge(stops[sid].edge)
        if edge.priority < MAIN_STREET_PRIORITY:
            network = set_edge_priority(network, edge.id, MAIN_STREET_PRIORITY)

    def tour(through: tuple[str, ...]) -> tuple[str, ...]:
        path = shortest_edge_path(network, origin_edge, stops[through[0]].edge)
        for a, b in zip(through, through[1:]):
            leg = shortest_edge_path(network, stops[a].edge, stops[b].edge)
            path = path + leg[1:]
        tail = path_to_sink(network, stops[through[-1]].edge)
        return path + tail[1:]

    vehicles: list[VehicleSpec] = []
    routes: list[Route] = []
    if len(depart_times) == 1:
        vclass = VCLASS_DOUBLE
        vid = "bundled"
        route = Route(id=f"route_{vid}", edges=tour(stop_ids))
        routes.append(route)
        vehicles.append(
            VehicleSpec(
                id=vid,
                vtype=_type_for(type_map, vclass).id,
                route=route.id,
                depart=depart_times[0],
                stops=tuple(StopCall(sid, dwell) for sid in stop_ids),
            )
        )
    elif len(depart_times) == len(stop_ids):
        vclass = VCLASS_SINGLE
        for i, (sid, depart) in enumerate(zip(stop_ids, depart_times)):
            vid = f"single_{i}"
            route = Route(id=f"route_{vid}", edges=tour((sid,)))
            routes.append(route)
            vehicles.append(
                VehicleSpec(
                    id=vid,
                    vtype=_type_for(type_map, vclass).id,
                    route=route.id,
                    depart=depart,
                    stops=(StopCall(sid, dwell),),
                )
            )
    else:
        raise BadScenario(
            f"need one depart time (bundled) or one per stop, got "
            f"{len(depart_times)} for {len(stop_ids)} stops"
        )
    return ScenarioDefinition(
        label=label,
        network=network,
        vtypes=tuple(type_map.values()),
        routes=tuple(routes),
        vehicles=tuple(vehicles),
    )


def _type_for(type_map: dict[str, VehicleTypeSpec], vclass: str) -> VehicleTypeSpec:
    for vt in type_map.values():
        if vt.vclass == vclass:
            return vt
    raise BadScenario(f"no vehicle type with class {vclass!r} available")


# -- reporting ---------------------------------------------------------------


def _totals(label: str, result: SimulationResult) -> ScenarioTotals:
    for vid, arrived in result.arrived.items():
        if arrived is None:
            raise IncompleteResult(
                f"{label}: vehicle {vid!r} did not finish (t_end={result.t_end})"
            )
    return ScenarioTotals(
        label=label,
        co2_kg=result.total_co2_mg * 1e-6,
        fuel_l=result.total_fuel_ml * 1e-3,
        travel_time_s=sum(result.travel_times.values()),
        distance_m=sum(result.distances.values()),
    )


def compare(
    result_i: SimulationResult,
    result_ii: SimulationResult,
    labels: tuple[str, str] = (SCENARIO_I, SCENARIO_II),
) -> ScenarioReport:
    """Reduce two complete runs to totals and relative savings.

    Reductions are computed from the rounded-for-report unit values (kg,
    litres) so that recomputing them from report.csv reproduces the stored
    percentages exactly.
    """
    tot_i = _totals(labels[0], result_i)
    tot_ii = _totals(labels[1], result_ii)

    def reduction(a: float, b: float) -> float:
        return 100.0 * (1.0 - a / b) if b > 0 else 0.0

    return ScenarioReport(
        scenario_i=tot_i,
        scenario_ii=tot_ii,
        co2_reduction_pct=reduction(tot_i.co2_kg, tot_ii.co2_kg),
        fuel_reduction_pct=reduction(tot_i.fuel_l, tot_ii.fuel_l),
        time_delta_s=tot_i.travel_time_s - tot_ii.travel_time_s,
    )


# -- orchestration -------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonConfig:
    origin_edge: str
    stop_ids: tuple[str, ...]
    additional_file: Path
    emissions_file: Path | None = None
    vtypes_file: Path | None = None
    depart_bundled: float = 0.0
    departs_single: tuple[float, ...] | None = None
    dwell_s: float = DEFAULT_DWELL_S
    dt: float = 1.0
    seed: int = 0
    t_max: float = 3600.0


_CONFIG_KEYS = {
    "origin_edge",
    "stops",
    "additional_file",
    "emissions_file",
    "vtypes_file",
    "depart_bundled",
    "departs_single",
    "dwell_s",
    "dt",
    "seed",
    "t_max",
}


def load_comparison_config(path: str | Path) -> ComparisonConfig:
    """Read the scenario config JSON; relative paths anchor at the file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BadScenario(f"cannot read scenario config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise BadScenario("scenario config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise BadScenario(f"unknown scenario config keys: {sorted(unknown)}")
    for key in ("origin_edge", "stops", "additional_file"):
        if key not in raw:
            raise BadScenario(f"scenario config misses required key {key!r}")
    stops = raw["stops"]
    if not isinstance(stops, list) or not all(isinstance(s, str) for s in stops):
        raise BadScenario("'stops' must be a list of container stop ids")
    base = path.parent

    def resolve(key: str) -> Path | None:
        value = raw.get(key)
        return (base / value) if value is not None else None

    departs = raw.get("departs_single")
    return ComparisonConfig(
        origin_edge=raw["origin_edge"],
        stop_ids=tuple(stops),
        additional_file=base / raw["additional_file"],
        emissions_file=resolve("emissions_file"),
        vtypes_file=resolve("vtypes_file"),
        depart_bundled=float(raw.get("depart_bundled", 0.0)),
        departs_single=tuple(float(d) for d in departs) if departs else None,
        dwell_s=float(raw.get("dwell_s", DEFAULT_DWELL_S)),
        dt=float(raw.get("dt", 1.0)),
        seed=int(raw.get("seed", 0)),
        t_max=float(raw.get("t_max", 3600.0)),
    )


@dataclass(frozen=True)
class ComparisonOutcome:
    report: ScenarioReport
    result_i: SimulationResult
    result_ii: SimulationResult
    definition_i: ScenarioDefinition
    definition_ii: ScenarioDefinition


def run_comparison(network: Network, cfg: ComparisonConfig) -> ComparisonOutcome:
    """Build and run both scenarios, then reduce them to a report."""
    detectors, stop_list = scenario_io.parse_additional_file(
        cfg.additional_file.read_bytes(), network
    )
    stops = {s.id: s for s in stop_list}
    registry = (
        load_emission_classes(cfg.emissions_file.read_bytes())
        if cfg.emissions_file is not None
        else engine.default_emission_registry()
    )
    vtypes: dict[str, VehicleTypeSpec] | None = None
    if cfg.vtypes_file is not None:
        file_types, _, _ = scenario_io.parse_routes_file(cfg.vtypes_file.read_bytes())
        vtypes = {vt.vclass: vt for vt in file_types}

    departs_single = cfg.departs_single
    if departs_single is None:
        departs_single = tuple(10.0 * i for i in range(len(cfg.stop_ids)))
    if len(departs_single) != len(cfg.stop_ids):
        raise BadScenario("departs_single must list one depart time per stop")

    defn_i = build_scenario(
        SCENARIO_I,
        network,
        cfg.stop_ids,
        cfg.origin_edge,
        (cfg.depart_bundled,),
        stops=stops,
        vtypes=vtypes,
        dwell=cfg.dwell_s,
    )
    defn_ii = build_scenario(
        SCENARIO_II,
        network,
        cfg.stop_ids,
        cfg.origin_edge,
        departs_single,
        stops=stops,
        vtypes=vtypes,
        dwell=cfg.dwell_s,
    )

    sim_cfg = SimulationConfig(
        dt=cfg.dt, t_max=cfg.t_max, seed=cfg.seed, record_trajectories=True
    )
    results = []
    for defn in (defn_i, defn_ii):
        world = engine.build_world(
            defn.network,
            list(defn.vtypes),
            list(defn.vehicles),
            list(defn.routes),
            detectors=list(detectors),
            stops=stop_list,
            registry=registry,
            config=sim_cfg,
        )
        results.append(engine.run(world))
    report = compare(results[0], results[1])
    return ComparisonOutcome(report, results[0], results[1], defn_i, defn_ii)


# -- rendering ----------------------------------------------------------------


def _report_csv(report: ScenarioReport) -> str:
    lines = [REPORT_HEADER]
    for tot in (report.scenario_i, report.scenario_ii):
        lines.append(
            f"{tot.label},{tot.co2_kg!r},{tot.fuel_l!r},"
            f"{tot.travel_time_s!r},{tot.distance_m!r}"
        )
    lines.append(
        f"reduction,{report.co2_reduction_pct!r},{report.fuel_reduction_pct!r},"
        f"{report.time_delta_s!r}"
    )
    return "\n".join(lines) + "\n"


def _timeseries_csv(results: list[SimulationResult], quantity: str) -> str:
    lines = [TIMESERIES_HEADER]
    for result in results:
        rows = []
        for vid, points in result.trajectories.items():
            for p in points:
                rate = p.co2_rate_mg_s if quantity == "co2" else p.fuel_rate_ml_s
                rows.append((p.t, vid, rate))
        rows.sort(key=lambda r: (r[0], r[1]))
        lines.extend(f"{t!r},{vid},{rate!r}" for t, vid, rate in rows)
    return "\n".join(lines) + "\n"


def _svg_bars(report: ScenarioReport) -> str:
    """Minimal deterministic bar chart of the two emission totals."""
    pairs = [
        ("CO2 [kg]", report.scenario_i.co2_kg, report.scenario_ii.co2_kg,
         report.co2_reduction_pct),
        ("Fuel [l]", report.scenario_i.fuel_l, report.scenario_ii.fuel_l,
         report.fuel_reduction_pct),
    ]
    width, height, margin = 640, 320, 40
    panel_w = (width - 3 * margin) / 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for i, (title, val_i, val_ii, red) in enumerate(pairs):
        x0 = margin + i * (panel_w + margin)
        top = margin
        bottom = height - 2 * margin
        span = bottom - top
        peak = max(val_i, val_ii, 1e-12)
        bar_w = panel_w / 3
        for j, (label, value, color) in enumerate(
            (("I", val_i, "#2c7fb8"), ("II", val_ii, "#d95f0e"))
        ):
            h = span * value / peak
            x = x0 + bar_w / 2 + j * 1.5 * bar_w
            y = bottom - h
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                f'height="{h:.2f}" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{x + bar_w / 2:.2f}" y="{bottom + 16:.2f}" '
                f'text-anchor="middle" font-size="12">{label}</text>'
            )
            parts.append(
                f'<text x="{x + bar_w / 2:.2f}" y="{y - 4:.2f}" '
                f'text-anchor="middle" font-size="11">{value:.2f}</text>'
            )
        parts.append(
            f'<text x="{x0 + panel_w / 2:.2f}" y="{margin - 16:.2f}" '
            f'text-anchor="middle" font-size="13">{title} '
            f'(reduction {red:.1f}%)</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_report(
    outcome: ComparisonOutcome, out_dir: str | Path
) -> list[Path]:
    """Write report.csv, rate time series, detector XML and the chart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = [outcome.result_i, outcome.result_ii]
    written = []

    def emit(name: str, payload: str | bytes) -> None:
        path = out / name
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        path.write_bytes(payload)
        written.append(path)

    emit("report.csv", _report_csv(outcome.report))
    emit("co2_timeseries.csv", _timeseries_csv(results, "co2"))
    emit("fuel_timeseries.csv", _timeseries_csv(results, "fuel"))
    emit("comparison.svg", _svg_bars(outcome.report))
    emit(
        "detectors_scenario_I.xml",
        scenario_io.write_detector_output(outcome.result_i.detector_intervals),
    )
    emit(
        "detectors_scenario_II.xml",
        scenario_io.write_detector_output(outcome.result_ii.detector_intervals),
    )
    return written
