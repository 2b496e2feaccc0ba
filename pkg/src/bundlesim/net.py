"""In-memory road network: nodes, directed edges, signal programs, routes.

Geometry is one-dimensional: a position on the network is an (edge, offset)
pair, with offset measured in meters from the edge start.  Every edge has a
single lane; there is no lane changing.  Networks are immutable after
:func:`build_network`; mutating operations return a new value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class NetworkError(Exception):
    """Base class for network construction and lookup failures."""


class DuplicateId(NetworkError):
    pass


class DanglingNode(NetworkError):
    pass


class UnknownEdge(NetworkError):
    pass


class MissingTlsProgram(NetworkError):
    pass


class InvalidAttribute(NetworkError):
    pass


class DisconnectedRoute(NetworkError):
    pass


class NodeKind(str, Enum):
    PLAIN = "plain"
    TRAFFIC_LIGHT = "traffic_light"


#: Priority conventionally assigned to main streets; container-stop access
#: edges are raised to this level during scenario construction.
MAIN_STREET_PRIORITY = 10

GREEN = "g"
YELLOW = "y"
RED = "r"
_SIGNAL_CHARS = frozenset((GREEN, YELLOW, RED))


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind = NodeKind.PLAIN
    tls_ref: str | None = None


@dataclass(frozen=True)
class Edge:
    """Directed road segment.

    ``allowed`` restricts which vehicle classes may use the edge; ``None``
    means unrestricted.
    """

    id: str
    from_node: str
    to_node: str
    length: float
    speed_limit: float
    priority: int = 0
    allowed: frozenset[str] | None = None

    def permits(self, vclass: str) -> bool:
        return self.allowed is None or vclass in self.allowed


@dataclass(frozen=True)
class TlsPhase:
    duration: float
    state: str  # one of g/y/r per controlled edge, aligned with program.controlled


@dataclass(frozen=True)
class TrafficLightProgram:
    """Fixed-time signal program.

    ``controlled`` lists the incoming edges whose stop lines the program
    governs; phase ``state`` strings carry one signal character per
    controlled edge, in the same order.  The active phase at time t is the
    one covering ``(t + offset) mod cycle``.
    """

    id: str
    controlled: tuple[str, ...]
    phases: tuple[TlsPhase, ...]
    offset: float = 0.0

    @property
    def cycle(self) -> float:
        return sum(p.duration for p in self.phases)

    def state_at(self, t: float) -> dict[str, str]:
        """Signal character per controlled edge at simulation time ``t``."""
        elapsed = (t + self.offset) % self.cycle
        for phase in self.phases:
            if elapsed < phase.duration:
                return dict(zip(self.controlled, phase.state))
            elapsed -= phase.duration
        # elapsed == cycle can only happen through float noise at the wrap
        last = self.phases[-1]
        return dict(zip(self.controlled, last.state))


@dataclass(frozen=True)
class Route:
    id: str
    edges: tuple[str, ...]


@dataclass
class Network:
    nodes: dict[str, Node]
    edges: dict[str, Edge]
    tls_programs: dict[str, TrafficLightProgram]
    # node id -> edge ids leaving that node, derived, excluded from equality
    outgoing: dict[str, tuple[str, ...]] = field(compare=False, default_factory=dict)
    # edge id -> (program, index into its state string), derived
    signal_index: dict[str, tuple[TrafficLightProgram, int]] = field(
        compare=False, default_factory=dict
    )

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownEdge(edge_id) from None


def _check_node(node: Node) -> None:
    has_ref = node.tls_ref is not None
    if (node.kind is NodeKind.TRAFFIC_LIGHT) != has_ref:
        raise InvalidAttribute(
            f"node {node.id!r}: kind {node.kind.value!r} inconsistent with tls reference"
        )


def _check_edge(edge: Edge) -> None:
    if edge.length <= 0:
        raise InvalidAttribute(f"edge {edge.id!r}: length must be > 0")
    if edge.speed_limit <= 0:
        raise InvalidAttribute(f"edge {edge.id!r}: speed limit must be > 0")
    if edge.priority < 0:
        raise InvalidAttribute(f"edge {edge.id!r}: priority must be >= 0")
    if edge.from_node == edge.to_node:
        raise InvalidAttribute(f"edge {edge.id!r}: from and to node are identical")


def _check_program(prog: TrafficLightProgram) -> None:
    if not prog.phases:
        raise InvalidAttribute(f"signal program {prog.id!r}: needs at least one phase")
    if prog.offset < 0:
        raise InvalidAttribute(f"signal program {prog.id!r}: offset must be >= 0")
    for phase in prog.phases:
        if phase.duration <= 0:
            raise InvalidAttribute(
                f"signal program {prog.id!r}: phase duration must be > 0"
            )
        if len(phase.state) != len(prog.controlled):
            raise InvalidAttribute(
                f"signal program {prog.id!r}: phase state {phase.state!r} does not "
                f"cover all {len(prog.controlled)} controlled edges"
            )
        bad = set(phase.state) - _SIGNAL_CHARS
        if bad:
            raise InvalidAttribute(
                f"signal program {prog.id!r}: invalid signal chars {sorted(bad)}"
            )


def build_network(nodes, edges, tls_programs=()) -> Network:
    """Assemble and validate a network from node/edge/program collections.

    Raises a specific :class:`NetworkError` subclass for every violated
    invariant: duplicate ids, dangling node references, signal references
    to missing programs, and malformed attribute values.
    """
    node_map: dict[str, Node] = {}
    for node in nodes:
        if node.id in node_map:
            raise DuplicateId(f"node {node.id!r}")
        _check_node(node)
        node_map[node.id] = node

    prog_map: dict[str, TrafficLightProgram] = {}
    for prog in tls_programs:
        if prog.id in prog_map:
            raise DuplicateId(f"signal program {prog.id!r}")
        _check_program(prog)
        prog_map[prog.id] = prog

    edge_map: dict[str, Edge] = {}
    outgoing: dict[str, list[str]] = {nid: [] for nid in node_map}
    for edge in edges:
        if edge.id in edge_map:
            raise DuplicateId(f"edge {edge.id!r}")
        _check_edge(edge)
        for ref in (edge.from_node, edge.to_node):
            if ref not in node_map:
                raise DanglingNode(ref)
        edge_map[edge.id] = edge
        outgoing[edge.from_node].append(edge.id)

    signal_index: dict[str, tuple[TrafficLightProgram, int]] = {}
    for prog in prog_map.values():
        for i, edge_id in enumerate(prog.controlled):
            if edge_id not in edge_map:
                raise DanglingNode(f"signal program {prog.id!r} controls unknown edge {edge_id!r}")
            if edge_id in signal_index:
                raise DuplicateId(f"edge {edge_id!r} controlled by more than one program")
            signal_index[edge_id] = (prog, i)

    for node in node_map.values():
        if node.tls_ref is not None and node.tls_ref not in prog_map:
            raise MissingTlsProgram(node.tls_ref)

    return Network(
        nodes=node_map,
        edges=edge_map,
        tls_programs=prog_map,
        outgoing={nid: tuple(eids) for nid, eids in outgoing.items()},
        signal_index=signal_index,
    )


def validate_route(network: Network, route: Route) -> None:
    """Check that a route is non-empty, known, and connected end to end."""
    if not route.edges:
        raise DisconnectedRoute(f"route {route.id!r} is empty")
    prev: Edge | None = None
    for edge_id in route.edges:
        edge = network.edge(edge_id)
        if prev is not None and prev.to_node != edge.from_node:
            raise DisconnectedRoute(
                f"route {route.id!r}: edge {prev.id!r} ends at {prev.to_node!r} "
                f"but {edge.id!r} starts at {edge.from_node!r}"
            )
        prev = edge


def route_length(network: Network, route: Route) -> float:
    """Total length of a route in meters (sum of member edge lengths)."""
    return sum(network.edge(eid).length for eid in route.edges)


def effective_speed_limit(edge: Edge, vtype) -> float:
    """Speed a vehicle of the given type may drive on the edge: min of both caps."""
    return min(edge.speed_limit, vtype.max_speed)


def set_edge_priority(network: Network, edge_id: str, priority: int) -> Network:
    """Return a copy of the network with one edge's priority replaced.

    Used by scenario setup to raise container-stop access streets to
    main-street priority so deliveries may legally reach them.
    """
    if priority < 0:
        raise InvalidAttribute(f"priority must be >= 0, got {priority}")
    old = network.edge(edge_id)
    edges = dict(network.edges)
    edges[edge_id] = replace(old, priority=priority)
    return Network(
        nodes=dict(network.nodes),
        edges=edges,
        tls_programs=dict(network.tls_programs),
        outgoing=dict(network.outgoing),
        signal_index=dict(network.signal_index),
    )


def default_route_edges(network: Network) -> tuple[str, ...]:
    """Derive a deterministic generation route: start at the lexicographically
    smallest source edge (no incoming edges at its start node) and follow the
    smallest outgoing edge until a sink or a repeated edge is hit.
    """
    if not network.edges:
        raise UnknownEdge("network has no edges")
    has_incoming = {e.to_node for e in network.edges.values()}
    sources = sorted(eid for eid, e in network.edges.items() if e.from_node not in has_incoming)
    current = network.edges[sources[0]] if sources else network.edges[min(network.edges)]
    path = [current.id]
    seen = {current.id}
    while True:
        candidates = sorted(network.outgoing.get(current.to_node, ()))
        nxt = next((eid for eid in candidates if eid not in seen), None)
        if nxt is None:
            return tuple(path)
        current = network.edges[nxt]
        path.append(nxt)
        seen.add(nxt)
