"""Readers and writers for the three scenario file kinds plus detector output.

The on-disk dialect is a minimal XML vocabulary (UTF-8, canonical attribute
order when writing, shortest round-trip decimals for numbers):

* network file::

    <network>
      <node id kind tls?/> ...
      <edge id from to length speed priority allow?/> ...
      <tlProgram id offset controlled="e1 e2 ...">
        <phase dur state="gyr chars, one per controlled edge"/> ...
      </tlProgram> ...
    </network>

* route file::

    <routes>
      <vType id vClass maxSpeed minSpeed accel decel length minGap sigma emissionClass/> ...
      <route id edges="e1 e2 ..."/> ...
      <vehicle id type route depart> <stop containerStop dwell/> ... </vehicle> ...
    </routes>

* additional file::

    <additional>
      <inductionLoop id edge pos freq/> ...
      <containerStop id edge startPos endPos/> ...
    </additional>

* detector output::

    <detector> <interval begin end id nVehContrib meanSpeed co2_mg fuel_ml/> ... </detector>

Parsers are total over arbitrary byte input: they either return a value or
raise a :class:`ScenarioFileError` (or a :class:`~bundlesim.net.NetworkError`
forwarded from network validation), never anything else.

Seeded route-file generation uses CPython's ``random.Random`` core generator,
whose ``random()`` stream for a given seed is documented to be stable across
platforms and versions; identical generation specs therefore yield
byte-identical files.
"""

from __future__ import annotations

import math
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .detectors import DetectorInterval
from .net import (
    Edge,
    Network,
    Node,
    NodeKind,
    Route,
    TlsPhase,
    TrafficLightProgram,
    build_network,
    validate_route,
)

#: Dwell applied to a stop entry that does not carry an explicit duration.
DEFAULT_DWELL_S = 90.0

VCLASS_SINGLE = "truck_single"
VCLASS_DOUBLE = "truck_double"
_VCLASSES = (VCLASS_SINGLE, VCLASS_DOUBLE)


class ScenarioFileError(Exception):
    """Base class for scenario file parse/serialize failures."""


class MalformedXml(ScenarioFileError):
    pass


class SchemaViolation(ScenarioFileError):
    pass


class NoEdges(ScenarioFileError):
    pass


class UnknownVClass(ScenarioFileError):
    pass


class NegativeDepart(ScenarioFileError):
    pass


class PosOutOfRange(ScenarioFileError):
    pass


class InvalidProbability(ScenarioFileError):
    pass


class UnsortedIntervals(ScenarioFileError):
    pass


@dataclass(frozen=True)
class VehicleTypeSpec:
    id: str
    vclass: str
    max_speed: float
    min_speed: float
    accel: float
    decel: float
    length: float
    min_gap: float
    sigma: float
    emission_class: str


@dataclass(frozen=True)
class StopCall:
    container_stop: str
    dwell: float = DEFAULT_DWELL_S


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    vtype: str
    route: str
    depart: float
    stops: tuple[StopCall, ...] = ()


@dataclass(frozen=True)
class ContainerStopSpec:
    id: str
    edge: str
    start_pos: float
    end_pos: float


@dataclass(frozen=True)
class DetectorSpec:
    id: str
    edge: str
    pos: float
    freq: float


# Conventional heavy-vehicle values; the shipped reference files carry the
# same numbers and remain the overridable source of truth for simulations.
DEFAULT_SINGLE_TRAILER = VehicleTypeSpec(
    id="truck_single",
    vclass=VCLASS_SINGLE,
    max_speed=15.0,
    min_speed=5.0,
    accel=1.3,
    decel=4.0,
    length=12.0,
    min_gap=2.5,
    sigma=0.0,
    emission_class="HBEFA3/HDV_G",
)
DEFAULT_DOUBLE_TRAILER = VehicleTypeSpec(
    id="truck_double",
    vclass=VCLASS_DOUBLE,
    max_speed=15.0,
    min_speed=5.0,
    accel=1.0,
    decel=4.0,
    length=18.75,
    min_gap=2.5,
    sigma=0.0,
    emission_class="HBEFA3/HDV_G",
)


@dataclass(frozen=True)
class GenSpec:
    """Parameters for seeded route-file generation.

    Per step ``i`` in ``range(n_steps)`` two independent uniform draws are
    taken; the first emits a single-trailer vehicle when below ``p_single``,
    the second a double-trailer vehicle when below ``p_double``.  Vehicle ids
    count up from 0, departures equal the step index.
    """

    n_steps: int
    p_single: float
    p_double: float
    seed: int
    route_edges: tuple[str, ...] | None = None
    vtypes: tuple[VehicleTypeSpec, ...] = field(
        default=(DEFAULT_SINGLE_TRAILER, DEFAULT_DOUBLE_TRAILER)
    )


# ---------------------------------------------------------------------------
# low-level helpers


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_root(data, expected: str) -> ET.Element:
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except (ET.ParseError, ValueError, LookupError) as exc:
        # LookupError/ValueError escape expat for e.g. bogus encoding declarations
        raise MalformedXml(str(exc)) from None
    if root.tag != expected:
        raise SchemaViolation(f"expected root element <{expected}>, got <{root.tag}>")
    return root


def _attr(elem: ET.Element, name: str) -> str:
    value = elem.get(name)
    if value is None:
        raise SchemaViolation(f"<{elem.tag}> missing required attribute {name!r}")
    return value


def _float_attr(elem: ET.Element, name: str) -> float:
    raw = _attr(elem, name)
    try:
        value = float(raw)
    except ValueError:
        raise SchemaViolation(f"<{elem.tag} {name}={raw!r}>: not a decimal number") from None
    if not math.isfinite(value):
        raise SchemaViolation(f"<{elem.tag} {name}={raw!r}>: not finite")
    return value


def _int_attr(elem: ET.Element, name: str) -> int:
    raw = _attr(elem, name)
    try:
        return int(raw)
    except ValueError:
        raise SchemaViolation(f"<{elem.tag} {name}={raw!r}>: not an integer") from None


def _reject_unknown(root: ET.Element, known: tuple[str, ...]) -> None:
    for child in root:
        if child.tag not in known:
            raise SchemaViolation(f"unexpected element <{child.tag}> in <{root.tag}>")


def _serialize(root: ET.Element) -> bytes:
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# ---------------------------------------------------------------------------
# network file


def parse_network_file(data) -> Network:
    """Parse network XML into a validated :class:`~bundlesim.net.Network`."""
    root = _parse_root(data, "network")
    _reject_unknown(root, ("node", "edge", "tlProgram"))

    nodes = []
    for elem in root.iter("node"):
        kind_raw = _attr(elem, "kind")
        try:
            kind = NodeKind(kind_raw)
        except ValueError:
            raise SchemaViolation(f"<node kind={kind_raw!r}>: unknown node kind") from None
        nodes.append(Node(id=_attr(elem, "id"), kind=kind, tls_ref=elem.get("tls")))

    edges = []
    for elem in root.iter("edge"):
        allow_raw = elem.get("allow")
        allowed = frozenset(allow_raw.split()) if allow_raw is not None else None
        edges.append(
            Edge(
                id=_attr(elem, "id"),
                from_node=_attr(elem, "from"),
                to_node=_attr(elem, "to"),
                length=_float_attr(elem, "length"),
                speed_limit=_float_attr(elem, "speed"),
                priority=_int_attr(elem, "priority"),
                allowed=allowed,
            )
        )
    if not edges:
        raise NoEdges("network file defines no edges")

    programs = []
    for elem in root.iter("tlProgram"):
        phases = []
        for child in elem:
            if child.tag != "phase":
                raise SchemaViolation(f"unexpected element <{child.tag}> in <tlProgram>")
            phases.append(TlsPhase(duration=_float_attr(child, "dur"), state=_attr(child, "state")))
        programs.append(
            TrafficLightProgram(
                id=_attr(elem, "id"),
                controlled=tuple(_attr(elem, "controlled").split()),
                phases=tuple(phases),
                offset=_float_attr(elem, "offset"),
            )
        )

    return build_network(nodes, edges, programs)


def write_network_file(network: Network) -> bytes:
    root = ET.Element("network")
    for node in network.nodes.values():
        attrs = {"id": node.id, "kind": node.kind.value}
        if node.tls_ref is not None:
            attrs["tls"] = node.tls_ref
        ET.SubElement(root, "node", attrs)
    for edge in network.edges.values():
        attrs = {
            "id": edge.id,
            "from": edge.from_node,
            "to": edge.to_node,
            "length": _fmt(edge.length),
            "speed": _fmt(edge.speed_limit),
            "priority": str(edge.priority),
        }
        if edge.allowed is not None:
            attrs["allow"] = " ".join(sorted(edge.allowed))
        ET.SubElement(root, "edge", attrs)
    for prog in network.tls_programs.values():
        elem = ET.SubElement(
            root,
            "tlProgram",
            {"id": prog.id, "offset": _fmt(prog.offset), "controlled": " ".join(prog.controlled)},
        )
        for phase in prog.phases:
            ET.SubElement(elem, "phase", {"dur": _fmt(phase.duration), "state": phase.state})
    return _serialize(root)


# ---------------------------------------------------------------------------
# route file


def _check_vtype(spec: VehicleTypeSpec) -> None:
    if spec.vclass not in _VCLASSES:
        raise UnknownVClass(spec.vclass)
    if not 0 < spec.min_speed <= spec.max_speed:
        raise SchemaViolation(
            f"vType {spec.id!r}: need 0 < minSpeed <= maxSpeed, "
            f"got {spec.min_speed}/{spec.max_speed}"
        )
    for name, value in (
        ("accel", spec.accel),
        ("decel", spec.decel),
        ("length", spec.length),
        ("minGap", spec.min_gap),
    ):
        if value <= 0:
            raise SchemaViolation(f"vType {spec.id!r}: {name} must be > 0")
    if not 0 <= spec.sigma <= 1:
        raise SchemaViolation(f"vType {spec.id!r}: sigma must be in [0, 1]")
    if not spec.emission_class:
        raise SchemaViolation(f"vType {spec.id!r}: emissionClass must be non-empty")


def parse_routes_file(data) -> tuple[list[VehicleTypeSpec], list[VehicleSpec], list[Route]]:
    """Parse a route file into vehicle types, vehicles, and routes.

    Route edge connectivity is not checked here; the engine validates it
    against the network when a scenario is loaded.
    """
    root = _parse_root(data, "routes")
    _reject_unknown(root, ("vType", "route", "vehicle"))

    vtypes = []
    for elem in root.iter("vType"):
        spec = VehicleTypeSpec(
            id=_attr(elem, "id"),
            vclass=_attr(elem, "vClass"),
            max_speed=_float_attr(elem, "maxSpeed"),
            min_speed=_float_attr(elem, "minSpeed"),
            accel=_float_attr(elem, "accel"),
            decel=_float_attr(elem, "decel"),
            length=_float_attr(elem, "length"),
            min_gap=_float_attr(elem, "minGap"),
            sigma=_float_attr(elem, "sigma"),
            emission_class=_attr(elem, "emissionClass"),
        )
        _check_vtype(spec)
        vtypes.append(spec)

    routes = []
    for elem in root.iter("route"):
        edges = tuple(_attr(elem, "edges").split())
        if not edges:
            raise SchemaViolation(f"<route id={elem.get('id')!r}>: edge list is empty")
        routes.append(Route(id=_attr(elem, "id"), edges=edges))

    vehicles = []
    for elem in root.iter("vehicle"):
        depart = _float_attr(elem, "depart")
        if depart < 0:
            raise NegativeDepart(f"vehicle {elem.get('id')!r}: depart {depart} < 0")
        stops = []
        for child in elem:
            if child.tag != "stop":
                raise SchemaViolation(f"unexpected element <{child.tag}> in <vehicle>")
            dwell = _float_attr(child, "dwell") if child.get("dwell") is not None else DEFAULT_DWELL_S
            if dwell <= 0:
                raise SchemaViolation(f"<stop dwell={dwell!r}>: dwell must be > 0")
            stops.append(StopCall(container_stop=_attr(child, "containerStop"), dwell=dwell))
        vehicles.append(
            VehicleSpec(
                id=_attr(elem, "id"),
                vtype=_attr(elem, "type"),
                route=_attr(elem, "route"),
                depart=depart,
                stops=tuple(stops),
            )
        )

    return vtypes, vehicles, routes


def write_routes_file(vtypes, vehicles, routes) -> bytes:
    root = ET.Element("routes")
    for vt in vtypes:
        ET.SubElement(
            root,
            "vType",
            {
                "id": vt.id,
                "vClass": vt.vclass,
                "maxSpeed": _fmt(vt.max_speed),
                "minSpeed": _fmt(vt.min_speed),
                "accel": _fmt(vt.accel),
                "decel": _fmt(vt.decel),
                "length": _fmt(vt.length),
                "minGap": _fmt(vt.min_gap),
                "sigma": _fmt(vt.sigma),
                "emissionClass": vt.emission_class,
            },
        )
    for route in routes:
        ET.SubElement(root, "route", {"id": route.id, "edges": " ".join(route.edges)})
    for veh in vehicles:
        elem = ET.SubElement(
            root,
            "vehicle",
            {"id": veh.id, "type": veh.vtype, "route": veh.route, "depart": _fmt(veh.depart)},
        )
        for stop in veh.stops:
            ET.SubElement(elem, "stop", {"containerStop": stop.container_stop, "dwell": _fmt(stop.dwell)})
    return _serialize(root)


# ---------------------------------------------------------------------------
# additional file


def parse_additional_file(data, network: Network | None = None):
    """Parse detectors and container stops.

    When ``network`` is given, positions are validated against edge lengths;
    without it only structural constraints are checked (the engine re-checks
    positions at scenario load).
    """
    root = _parse_root(data, "additional")
    _reject_unknown(root, ("inductionLoop", "containerStop"))

    def _edge_length(edge_id: str) -> float | None:
        if network is None:
            return None
        if edge_id not in network.edges:
            raise PosOutOfRange(f"unknown edge {edge_id!r} in additional file")
        return network.edges[edge_id].length

    detectors = []
    for elem in root.iter("inductionLoop"):
        spec = DetectorSpec(
            id=_attr(elem, "id"),
            edge=_attr(elem, "edge"),
            pos=_float_attr(elem, "pos"),
            freq=_float_attr(elem, "freq"),
        )
        if spec.freq <= 0:
            raise SchemaViolation(f"inductionLoop {spec.id!r}: freq must be > 0")
        if spec.pos < 0:
            raise PosOutOfRange(f"inductionLoop {spec.id!r}: pos {spec.pos} < 0")
        length = _edge_length(spec.edge)
        if length is not None and spec.pos > length:
            raise PosOutOfRange(
                f"inductionLoop {spec.id!r}: pos {spec.pos} beyond edge length {length}"
            )
        detectors.append(spec)

    stops = []
    for elem in root.iter("containerStop"):
        spec = ContainerStopSpec(
            id=_attr(elem, "id"),
            edge=_attr(elem, "edge"),
            start_pos=_float_attr(elem, "startPos"),
            end_pos=_float_attr(elem, "endPos"),
        )
        if not 0 <= spec.start_pos < spec.end_pos:
            raise PosOutOfRange(
                f"containerStop {spec.id!r}: need 0 <= startPos < endPos, "
                f"got {spec.start_pos}/{spec.end_pos}"
            )
        length = _edge_length(spec.edge)
        if length is not None and spec.end_pos > length:
            raise PosOutOfRange(
                f"containerStop {spec.id!r}: endPos {spec.end_pos} beyond edge length {length}"
            )
        stops.append(spec)

    return detectors, stops


def write_additional_file(detectors, stops) -> bytes:
    root = ET.Element("additional")
    for det in detectors:
        ET.SubElement(
            root,
            "inductionLoop",
            {"id": det.id, "edge": det.edge, "pos": _fmt(det.pos), "freq": _fmt(det.freq)},
        )
    for stop in stops:
        ET.SubElement(
            root,
            "containerStop",
            {
                "id": stop.id,
                "edge": stop.edge,
                "startPos": _fmt(stop.start_pos),
                "endPos": _fmt(stop.end_pos),
            },
        )
    return _serialize(root)


# ---------------------------------------------------------------------------
# detector output


def parse_detector_output(data) -> list[DetectorInterval]:
    root = _parse_root(data, "detector")
    _reject_unknown(root, ("interval",))
    intervals = []
    for elem in root.iter("interval"):
        interval = DetectorInterval(
            id=_attr(elem, "id"),
            begin=_float_attr(elem, "begin"),
            end=_float_attr(elem, "end"),
            n_veh=_int_attr(elem, "nVehContrib"),
            mean_speed=_float_attr(elem, "meanSpeed"),
            co2_mg=_float_attr(elem, "co2_mg"),
            fuel_ml=_float_attr(elem, "fuel_ml"),
        )
        if interval.begin >= interval.end:
            raise SchemaViolation(
                f"interval {interval.id!r}: begin {interval.begin} >= end {interval.end}"
            )
        if interval.n_veh < 0:
            raise SchemaViolation(f"interval {interval.id!r}: nVehContrib < 0")
        intervals.append(interval)
    return intervals


def write_detector_output(intervals) -> bytes:
    """Serialize detector intervals; input must be sorted by (detector id, begin)."""
    keys = [(iv.id, iv.begin) for iv in intervals]
    if keys != sorted(keys):
        raise UnsortedIntervals("intervals must be sorted by (detector id, begin)")
    root = ET.Element("detector")
    for iv in intervals:
        ET.SubElement(
            root,
            "interval",
            {
                "begin": _fmt(iv.begin),
                "end": _fmt(iv.end),
                "id": iv.id,
                "nVehContrib": str(iv.n_veh),
                "meanSpeed": _fmt(iv.mean_speed),
                "co2_mg": _fmt(iv.co2_mg),
                "fuel_ml": _fmt(iv.fuel_ml),
            },
        )
    return _serialize(root)


# ---------------------------------------------------------------------------
# seeded route-file generation


def generate_route_file(gen_spec: GenSpec, network: Network) -> bytes:
    """Emit a route file from two independent Bernoulli streams per time step.

    Pure function of ``gen_spec``: the same spec yields byte-identical output.
    """
    for name, p in (("p_single", gen_spec.p_single), ("p_double", gen_spec.p_double)):
        if not 0.0 <= p <= 1.0 or math.isnan(p):
            raise InvalidProbability(f"{name} must be in [0, 1], got {p}")
    if gen_spec.n_steps < 0:
        raise InvalidProbability(f"n_steps must be >= 0, got {gen_spec.n_steps}")

    from .net import default_route_edges  # local: avoids importing for pure parsing use

    edges = gen_spec.route_edges or default_route_edges(network)
    route = Route(id="gen", edges=tuple(edges))
    validate_route(network, route)

    by_class = {vt.vclass: vt for vt in gen_spec.vtypes}
    try:
        single, double = by_class[VCLASS_SINGLE], by_class[VCLASS_DOUBLE]
    except KeyError as exc:
        raise SchemaViolation(f"gen spec vtypes missing vClass {exc.args[0]!r}") from None

    rng = random.Random(gen_spec.seed)
    vehicles = []
    veh_nr = 0
    for step in range(gen_spec.n_steps):
        if rng.random() < gen_spec.p_single:
            vehicles.append(VehicleSpec(str(veh_nr), single.id, route.id, float(step)))
            veh_nr += 1
        if rng.random() < gen_spec.p_double:
            vehicles.append(VehicleSpec(str(veh_nr), double.id, route.id, float(step)))
            veh_nr += 1

    return write_routes_file(list(gen_spec.vtypes), vehicles, [route])
