"""Importable test helpers: tiny network builders and acceptance records."""

from __future__ import annotations

from pathlib import Path

from bundlesim.net import Edge, Node, Network, NodeKind, TlsPhase, TrafficLightProgram, build_network

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "bundlesim" / "data"

# (criterion number, title, passed, detail) records filled by test_acceptance
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((number, title, passed, detail))


def line_network(
    lengths=(500.0,),
    speed=13.89,
    tls: dict[int, TrafficLightProgram] | None = None,
) -> Network:
    """A straight chain of edges e0 -> e1 -> ... for focused tests.

    ``tls`` maps edge index to a program controlling that edge; the node at
    the edge's downstream end becomes a traffic light.
    """
    tls = tls or {}
    tls_by_node = {f"n{i + 1}": prog for i, prog in tls.items()}
    nodes = []
    for i in range(len(lengths) + 1):
        name = f"n{i}"
        if name in tls_by_node:
            nodes.append(Node(name, kind=NodeKind.TRAFFIC_LIGHT, tls_ref=tls_by_node[name].id))
        else:
            nodes.append(Node(name))
    edges = [
        Edge(f"e{i}", f"n{i}", f"n{i + 1}", length, speed)
        for i, length in enumerate(lengths)
    ]
    return build_network(nodes, edges, list(tls.values()))


def simple_tls(edge_id: str, green: float, yellow: float, red: float, offset: float = 0.0):
    return TrafficLightProgram(
        id=f"tls_{edge_id}",
        controlled=(edge_id,),
        phases=(TlsPhase(green, "g"), TlsPhase(yellow, "y"), TlsPhase(red, "r")),
        offset=offset,
    )
