"""Deterministic simulation engine.

A ``World`` combines a network, vehicle plans, container stops, detectors
and an emission registry, then advances in fixed steps.  Each step runs the
same phases in the same order:

1. insert due vehicles whose entry edge has room,
2. evaluate signal states at the step start,
3. snapshot all positions and choose every vehicle's next speed from it,
4. move vehicles, handling stop dwells and arrivals,
5. sample emission rates at post-step speeds and fold them into accounts,
6. advance detector windows and record loop crossings,
7. commit the new time and retire finished vehicles.

All decisions read the pre-step snapshot, so vehicle processing order never
changes the outcome.  The only random element is the Krauss dawdling noise,
drawn once per active vehicle per step from a seeded generator; with
``sigma == 0`` the draws still happen but have no effect, which keeps runs
with and without noise on the same stream.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib.resources import files

from . import dynamics, net, scenario_io
from .detectors import DetectorRuntime, RouteTrace, detect_crossings
from .dynamics import (
    OBSTACLE_LEADER,
    KraussParams,
    RouteFrame,
    VehiclePhase,
    VehicleState,
)
from .emissions import (
    CumulativeAccount,
    EmissionClassDef,
    EmissionRegistry,
    EmissionSample,
    account_step,
    emission_rate,
    load_emission_classes,
)
from .net import Network
from .scenario_io import (
    ContainerStopSpec,
    DetectorSpec,
    PosOutOfRange,
    VehicleSpec,
    VehicleTypeSpec,
)

__all__ = [
    "ScenarioError",
    "UnknownVType",
    "UnknownRouteRef",
    "UnknownStopRef",
    "StopNotOnRoute",
    "InvalidStopCall",
    "DuplicateVehicleId",
    "VClassNotAllowed",
    "BadConfig",
    "SimulationConfig",
    "TrajectoryPoint",
    "SimulationResult",
    "World",
    "build_world",
    "load_scenario",
    "default_emission_registry",
    "step",
    "run",
    "accounts_rows",
    "ACCOUNT_FIELDS",
]


class ScenarioError(Exception):
    """A scenario references things that do not fit together."""


class UnknownVType(ScenarioError):
    pass


class UnknownRouteRef(ScenarioError):
    pass


class UnknownStopRef(ScenarioError):
    pass


class StopNotOnRoute(ScenarioError):
    pass


class InvalidStopCall(ScenarioError):
    pass


class DuplicateVehicleId(ScenarioError):
    pass


class VClassNotAllowed(ScenarioError):
    pass


class BadConfig(ScenarioError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 1.0
    t_max: float = 3600.0
    seed: int = 0
    record_trajectories: bool = False


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    edge: str
    offset: float
    speed: float
    accel: float
    co2_rate_mg_s: float
    fuel_rate_ml_s: float


@dataclass(frozen=True)
class ResolvedStop:
    spec: ContainerStopSpec
    dwell: float
    start_s: float
    end_s: float


@dataclass
class ActiveVehicle:
    """Runtime record of one inserted vehicle."""

    spec: VehicleSpec
    vtype: VehicleTypeSpec
    frame: RouteFrame
    route_ids: tuple[str, ...]
    stops: tuple[ResolvedStop, ...]
    emission: EmissionClassDef
    state: VehicleState
    account: CumulativeAccount = field(default_factory=CumulativeAccount)
    next_stop: int = 0
    # movement of the last step, route-linear, for detector crossing checks
    prev_s: float = 0.0
    next_s: float = 0.0
    step_rates: tuple[float, float, float] = (0.0, 0.0, 0.0)
    trajectory: list[TrajectoryPoint] = field(default_factory=list)


@dataclass(frozen=True)
class PlannedVehicle:
    spec: VehicleSpec
    vtype: VehicleTypeSpec
    frame: RouteFrame
    route_ids: tuple[str, ...]
    stops: tuple[ResolvedStop, ...]
    emission: EmissionClassDef
    seq: int


@dataclass(frozen=True)
class SimulationResult:
    t_end: float
    truncated: bool
    accounts: dict[str, CumulativeAccount]
    departed: dict[str, float]
    arrived: dict[str, float | None]
    travel_times: dict[str, float]
    distances: dict[str, float]
    trajectories: dict[str, list[TrajectoryPoint]]
    detector_intervals: list

    @property
    def total_co2_mg(self) -> float:
        return sum(a.co2_mg for a in self.accounts.values())

    @property
    def total_fuel_ml(self) -> float:
        return sum(a.fuel_ml for a in self.accounts.values())


def default_emission_registry() -> EmissionRegistry:
    """Registry from the packaged coefficient file."""
    data = files("bundlesim").joinpath("data/hbefa_surrogate.emis").read_bytes()
    return load_emission_classes(data)


def _resolve_stops(
    spec: VehicleSpec,
    frame: RouteFrame,
    route_ids: tuple[str, ...],
    stops_by_id: dict[str, ContainerStopSpec],
) -> tuple[ResolvedStop, ...]:
    """Anchor each stop call to a route position, in route order."""
    resolved = []
    search_from = 0
    prev_end = float("-inf")
    for call in spec.stops:
        cs = stops_by_id.get(call.container_stop)
        if cs is None:
            raise UnknownStopRef(
                f"vehicle {spec.id!r}: unknown container stop {call.container_stop!r}"
            )
        if call.dwell <= 0:
            raise InvalidStopCall(
                f"vehicle {spec.id!r}: dwell must be positive, got {call.dwell}"
            )
        hit = None
        for k in range(search_from, len(route_ids)):
            if route_ids[k] != cs.edge:
                continue
            end_s = frame.cum_start[k] + cs.end_pos
            if end_s > prev_end:
                hit = (k, end_s)
                break
        if hit is None:
            raise StopNotOnRoute(
                f"vehicle {spec.id!r}: stop {cs.id!r} (edge {cs.edge!r}) is not "
                f"ahead on route {spec.route!r}"
            )
        k, end_s = hit
        resolved.append(
            ResolvedStop(cs, call.dwell, frame.cum_start[k] + cs.start_pos, end_s)
        )
        search_from = k
        prev_end = end_s
    return tuple(resolved)


class World:
    """Complete mutable simulation state."""

    def __init__(
        self,
        network: Network,
        vtypes: dict[str, VehicleTypeSpec],
        routes: dict[str, net.Route],
        stops: dict[str, ContainerStopSpec],
        detector_specs: list[DetectorSpec],
        registry: EmissionRegistry,
        config: SimulationConfig,
        params: KraussParams | None = None,
    ) -> None:
        if config.dt <= 0:
            raise BadConfig(f"dt must be positive, got {config.dt}")
        if config.t_max <= 0:
            raise BadConfig(f"t_max must be positive, got {config.t_max}")
        self.network = network
        self.vtypes = vtypes
        self.routes = routes
        self.stops = stops
        self.registry = registry
        self.config = config
        self.params = params or KraussParams()
        self.t = 0.0
        self.rng = random.Random(config.seed)
        self.pending: list[PlannedVehicle] = []
        self.active: list[ActiveVehicle] = []
        self.finished: list[ActiveVehicle] = []
        self._seq = 0
        self._ids: set[str] = set()
        self._frames: dict[str, RouteFrame] = {}

        for stop in stops.values():
            edge = network.edge(stop.edge)
            if not 0 <= stop.start_pos < stop.end_pos <= edge.length:
                raise PosOutOfRange(
                    f"container stop {stop.id!r} does not fit edge {stop.edge!r}"
                )
        self.detectors = []
        for spec in detector_specs:
            edge = network.edge(spec.edge)
            if not 0 <= spec.pos <= edge.length:
                raise PosOutOfRange(
                    f"detector {spec.id!r} position {spec.pos} outside edge "
                    f"{spec.edge!r} of length {edge.length}"
                )
            self.detectors.append(DetectorRuntime(spec, dt=config.dt))

    def _frame_for(self, route: net.Route) -> RouteFrame:
        frame = self._frames.get(route.id)
        if frame is None:
            net.validate_route(self.network, route)
            frame = RouteFrame.from_edges(
                tuple(self.network.edge(eid) for eid in route.edges)
            )
            self._frames[route.id] = frame
        return frame

    def add_vehicle(self, spec: VehicleSpec) -> None:
        """Validate one vehicle plan and queue it for insertion."""
        if spec.id in self._ids:
            raise DuplicateVehicleId(f"vehicle id {spec.id!r} already used")
        vtype = self.vtypes.get(spec.vtype)
        if vtype is None:
            raise UnknownVType(f"vehicle {spec.id!r}: unknown type {spec.vtype!r}")
        route = self.routes.get(spec.route)
        if route is None:
            raise UnknownRouteRef(f"vehicle {spec.id!r}: unknown route {spec.route!r}")
        frame = self._frame_for(route)
        for edge in frame.edges:
            if not edge.permits(vtype.vclass):
                raise VClassNotAllowed(
                    f"vehicle {spec.id!r}: class {vtype.vclass!r} not allowed on "
                    f"edge {edge.id!r}"
                )
        stops = _resolve_stops(spec, frame, route.edges, self.stops)
        emission = self.registry.get(vtype.emission_class)
        planned = PlannedVehicle(
            spec, vtype, frame, route.edges, stops, emission, self._seq
        )
        self._seq += 1
        self._ids.add(spec.id)
        self.pending.append(planned)
        self.pending.sort(key=lambda p: (p.spec.depart, p.seq))

    def min_expected_number(self) -> int:
        """Vehicles still to run: queued plus currently driving."""
        return len(self.pending) + len(self.active)

    def detector_intervals(self) -> list:
        """All detector windows as of now, ordered by (id, begin)."""
        rows = []
        for dr in self.detectors:
            rows.extend(dr.intervals_at(self.t))
        rows.sort(key=lambda iv: (iv.id, iv.begin))
        return rows

    # -- insertion ---------------------------------------------------------

    def _entry_clear(self, planned: PlannedVehicle) -> bool:
        """True when the route's start is free for a new front bumper at 0."""
        min_gap = planned.vtype.min_gap
        for av in self.active:
            edge_id = av.route_ids[av.state.edge_index]
            for k, eid in enumerate(planned.route_ids):
                if eid != edge_id:
                    continue
                rear = planned.frame.cum_start[k] + av.state.offset - av.vtype.length
                if rear < min_gap:
                    return False
        return True

    def _insert(self, planned: PlannedVehicle) -> None:
        state = VehicleState(
            id=planned.spec.id,
            edge_index=0,
            offset=0.0,
            speed=0.0,
            accel_applied=0.0,
            phase=VehiclePhase.DRIVING,
            dwell_remaining=0.0,
            odometer=0.0,
            departed_at=self.t,
        )
        self.active.append(
            ActiveVehicle(
                spec=planned.spec,
                vtype=planned.vtype,
                frame=planned.frame,
                route_ids=planned.route_ids,
                stops=planned.stops,
                emission=planned.emission,
                state=state,
            )
        )

    # -- leader lookup -----------------------------------------------------

    def _leaders_for(
        self, me: ActiveVehicle, snapshot: list[tuple[str, float, float, float]]
    ) -> list[tuple[float, float]]:
        """(rear_bumper_s, speed) of every vehicle ahead on my route.

        Another vehicle occupies my route wherever my route uses its current
        edge, so a route visiting an edge twice sees it on both passes.
        """
        s_me = me.frame.linear(me.state.edge_index, me.state.offset)
        leaders = []
        for edge_id, offset, speed, length in snapshot:
            for k in range(me.state.edge_index, len(me.route_ids)):
                if me.route_ids[k] != edge_id:
                    continue
                rear = me.frame.cum_start[k] + offset - length
                if rear - s_me >= 0.0:
                    leaders.append((rear, speed))
        return leaders


def build_world(
    network: Network,
    vtypes: list[VehicleTypeSpec],
    vehicles: list[VehicleSpec],
    routes: list[net.Route],
    detectors: list[DetectorSpec] = (),
    stops: list[ContainerStopSpec] = (),
    registry: EmissionRegistry | None = None,
    config: SimulationConfig | None = None,
    params: KraussParams | None = None,
) -> World:
    """Cross-validate parsed scenario parts and assemble a world."""
    vtype_map: dict[str, VehicleTypeSpec] = {}
    for vt in vtypes:
        if vt.id in vtype_map:
            raise DuplicateVehicleId(f"vehicle type id {vt.id!r} defined twice")
        vtype_map[vt.id] = vt
    route_map: dict[str, net.Route] = {}
    for r in routes:
        if r.id in route_map:
            raise DuplicateVehicleId(f"route id {r.id!r} defined twice")
        route_map[r.id] = r
    stop_map: dict[str, ContainerStopSpec] = {}
    for s in stops:
        if s.id in stop_map:
            raise DuplicateVehicleId(f"container stop id {s.id!r} defined twice")
        stop_map[s.id] = s
    seen_det = set()
    for d in detectors:
        if d.id in seen_det:
            raise DuplicateVehicleId(f"detector id {d.id!r} defined twice")
        seen_det.add(d.id)

    world = World(
        network=network,
        vtypes=vtype_map,
        routes=route_map,
        stops=stop_map,
        detector_specs=list(detectors),
        registry=registry if registry is not None else default_emission_registry(),
        config=config or SimulationConfig(),
        params=params,
    )
    for spec in vehicles:
        world.add_vehicle(spec)
    return world


def load_scenario(
    network_data: bytes,
    routes_data: bytes,
    additional_data: bytes | None = None,
    emissions_data: bytes | str | None = None,
    config: SimulationConfig | None = None,
    params: KraussParams | None = None,
) -> World:
    """Parse raw scenario files and build a world from them."""
    network = scenario_io.parse_network_file(network_data)
    vtypes, vehicles, routes = scenario_io.parse_routes_file(routes_data)
    if additional_data is not None:
        detectors, stops = scenario_io.parse_additional_file(additional_data, network)
    else:
        detectors, stops = [], []
    registry = (
        load_emission_classes(emissions_data)
        if emissions_data is not None
        else default_emission_registry()
    )
    return build_world(
        network, vtypes, vehicles, routes, detectors, stops, registry, config, params
    )


def step(world: World) -> None:
    """Advance the world by one time step."""
    cfg = world.config
    dt = cfg.dt
    t = world.t
    now = t + dt

    # 1. insertion, in (depart, file order); blocked vehicles retry next step
    if world.pending:
        still_pending = []
        for planned in world.pending:
            if planned.spec.depart <= t + 1e-9 and world._entry_clear(planned):
                world._insert(planned)
            else:
                still_pending.append(planned)
        world.pending = still_pending

    # 2. signal states at the step start
    signals: dict[str, str] = {}
    for prog in world.network.tls_programs.values():
        signals.update(prog.state_at(t))

    # 3. decide speeds from a pre-step snapshot
    snapshot = [
        (
            av.route_ids[av.state.edge_index],
            av.state.offset,
            av.state.speed,
            av.vtype.length,
        )
        for av in world.active
    ]
    decisions: list[float] = []
    for idx, av in enumerate(world.active):
        noise = world.rng.random()
        if av.state.phase is not VehiclePhase.DRIVING:
            decisions.append(0.0)
            continue
        others = snapshot[:idx] + snapshot[idx + 1 :]
        leaders = world._leaders_for(av, others)
        stop_target = (
            av.stops[av.next_stop].end_s if av.next_stop < len(av.stops) else None
        )
        s = av.frame.linear(av.state.edge_index, av.state.offset)
        obstacle = dynamics.obstacle_ahead(
            s,
            av.state.speed,
            av.frame,
            signals,
            stop_target,
            leaders,
            world.params,
        )
        if obstacle is None:
            v_safe = float("inf")
        else:
            gap = obstacle.gap
            if obstacle.kind == OBSTACLE_LEADER:
                gap = max(0.0, gap - av.vtype.min_gap)
            v_safe = dynamics.krauss_safe_speed(gap, obstacle.leader_speed, world.params)
        edge = av.frame.edges[av.state.edge_index]
        v_limit = dynamics.free_flow_speed(edge.speed_limit, av.vtype)
        decisions.append(
            dynamics.step_speed(av.state, v_limit, v_safe, av.vtype, world.params, dt, noise)
        )

    # 4. move everyone
    for av, v_next in zip(world.active, decisions):
        was_dwelling = av.state.phase is VehiclePhase.DWELLING
        stop_interval = None
        dwell = 0.0
        if av.next_stop < len(av.stops):
            rs = av.stops[av.next_stop]
            stop_interval = (rs.start_s, rs.end_s)
            dwell = rs.dwell
        av.prev_s = av.frame.linear(av.state.edge_index, av.state.offset)
        av.state = dynamics.advance_position(
            av.state, v_next, dt, av.frame, now, stop_interval, dwell
        )
        av.next_s = av.frame.linear(av.state.edge_index, av.state.offset)
        if was_dwelling and av.state.phase is VehiclePhase.DRIVING:
            av.next_stop += 1

    # 5. emissions at post-step speed and applied acceleration
    for av in world.active:
        v = av.state.speed
        a = av.state.accel_applied
        co2 = emission_rate(av.emission, "co2", v, a)
        fuel = emission_rate(av.emission, "fuel", v, a)
        account_step(av.account, EmissionSample(av.spec.id, now, co2, fuel), dt)
        av.step_rates = (v, co2, fuel)
        if cfg.record_trajectories:
            av.trajectory.append(
                TrajectoryPoint(
                    now,
                    av.route_ids[av.state.edge_index],
                    av.state.offset,
                    v,
                    a,
                    co2,
                    fuel,
                )
            )

    # 6. detectors: close windows up to the step start, then record passes.
    # Crossings carry the step-start stamp (left-of-step, like emissions), so
    # a pass during the run's final step still lands inside the last window.
    traces = {
        av.spec.id: RouteTrace(av.route_ids, av.frame.cum_start, av.prev_s, av.next_s)
        for av in world.active
    }
    rates = {av.spec.id: av.step_rates for av in world.active}
    for dr in world.detectors:
        dr.advance(world.t)
        for crossing in detect_crossings(dr.spec, traces, rates, world.t):
            dr.record(crossing)

    # 7. commit
    world.t = now
    still_active = []
    for av in world.active:
        if av.state.phase is VehiclePhase.DONE:
            world.finished.append(av)
        else:
            still_active.append(av)
    world.active = still_active


def run(world: World) -> SimulationResult:
    """Step until every vehicle has finished or t_max is hit."""
    truncated = False
    while world.min_expected_number() > 0:
        if world.t >= world.config.t_max - 1e-9:
            truncated = True
            break
        step(world)
    return collect_result(world, truncated=truncated)


def collect_result(world: World, truncated: bool = False) -> SimulationResult:
    """Freeze the current world state into a result record."""
    vehicles = sorted(
        world.finished + world.active, key=lambda av: av.state.departed_at
    )
    accounts: dict[str, CumulativeAccount] = {}
    departed: dict[str, float] = {}
    arrived: dict[str, float | None] = {}
    travel_times: dict[str, float] = {}
    distances: dict[str, float] = {}
    trajectories: dict[str, list[TrajectoryPoint]] = {}
    for av in vehicles:
        vid = av.spec.id
        accounts[vid] = av.account
        departed[vid] = av.state.departed_at
        arrived[vid] = av.state.arrived_at
        end = av.state.arrived_at if av.state.arrived_at is not None else world.t
        travel_times[vid] = end - av.state.departed_at
        distances[vid] = av.state.odometer
        trajectories[vid] = av.trajectory
    return SimulationResult(
        t_end=world.t,
        truncated=truncated,
        accounts=accounts,
        departed=departed,
        arrived=arrived,
        travel_times=travel_times,
        distances=distances,
        trajectories=trajectories,
        detector_intervals=world.detector_intervals(),
    )


ACCOUNT_FIELDS = (
    "vehicle",
    "co2_mg",
    "fuel_ml",
    "duration_s",
    "travel_time_s",
    "distance_m",
)


def accounts_rows(world: World) -> list[dict]:
    """Per-vehicle account rows, sorted by vehicle id.

    Works mid-run too: an unfinished vehicle's travel time is the time it
    has been on the road so far.
    """
    rows = []
    for av in sorted(world.finished + world.active, key=lambda a: a.spec.id):
        end = av.state.arrived_at if av.state.arrived_at is not None else world.t
        rows.append(
            {
                "vehicle": av.spec.id,
                "co2_mg": av.account.co2_mg,
                "fuel_ml": av.account.fuel_ml,
                "duration_s": av.account.duration_s,
                "travel_time_s": end - av.state.departed_at,
                "distance_m": av.state.odometer,
            }
        )
    return rows
