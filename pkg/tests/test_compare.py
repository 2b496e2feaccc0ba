"""Routing, scenario construction, and report rendering tests."""

from __future__ import annotations

import json

import pytest

from bundlesim.compare import (
    REPORT_HEADER,
    SCENARIO_I,
    SCENARIO_II,
    TIMESERIES_HEADER,
    BadScenario,
    IncompleteResult,
    NoPath,
    build_scenario,
    compare,
    load_comparison_config,
    path_to_sink,
    render_report,
    run_comparison,
    shortest_edge_path,
)
from bundlesim.emissions import CumulativeAccount
from bundlesim.engine import SimulationResult
from bundlesim.net import MAIN_STREET_PRIORITY, Edge, Node, build_network
from bundlesim.scenario_io import (
    DEFAULT_SINGLE_TRAILER,
    ContainerStopSpec,
    parse_additional_file,
)


def diamond_network():
    """Two equal-length branches between n1 and n4."""
    nodes = [Node(f"n{i}") for i in range(6)]
    edges = [
        Edge("start", "n0", "n1", 10.0, 10.0),
        Edge("a", "n1", "n2", 100.0, 10.0),
        Edge("b", "n1", "n3", 100.0, 10.0),
        Edge("a_end", "n2", "n4", 50.0, 10.0),
        Edge("b_end", "n3", "n4", 50.0, 10.0),
        Edge("goal", "n4", "n5", 10.0, 10.0),
    ]
    return build_network(nodes, edges)


class TestRouting:
    def test_reference_origin_to_first_stop(self, reference_network):
        path = shortest_edge_path(reference_network, "mw_approach", "side_uni_in")
        assert path == ("mw_approach", "exit_ramp", "a1", "side_uni_in")

    def test_same_edge(self, reference_network):
        assert shortest_edge_path(reference_network, "a2", "a2") == ("a2",)

    def test_equal_length_tie_breaks_lexicographically(self):
        net = diamond_network()
        assert shortest_edge_path(net, "start", "goal") == ("start", "a", "a_end", "goal")

    def test_no_path(self, reference_network):
        # the motorway continuation cannot be reached from the city exit
        with pytest.raises(NoPath):
            shortest_edge_path(reference_network, "a4", "a1")

    def test_path_to_sink(self, reference_network):
        assert path_to_sink(reference_network, "side_dor_in") == (
            "side_dor_in", "side_dor_out", "a4",
        )

    def test_sink_of_sink_is_itself(self, reference_network):
        assert path_to_sink(reference_network, "a4") == ("a4",)

    def test_no_sink_in_cycle(self):
        nodes = [Node("n0"), Node("n1")]
        edges = [Edge("c0", "n0", "n1", 10.0, 10.0), Edge("c1", "n1", "n0", 10.0, 10.0)]
        net = build_network(nodes, edges)
        with pytest.raises(NoPath):
            path_to_sink(net, "c0")


@pytest.fixture()
def reference_stops(data_dir, reference_network):
    _, stop_list = parse_additional_file(
        (data_dir / "delivery.add.xml").read_bytes(), reference_network
    )
    return {s.id: s for s in stop_list}


class TestBuildScenario:
    STOP_IDS = ("spar_university", "spar_dornach")

    def test_bundled(self, reference_network, reference_stops):
        defn = build_scenario(
            SCENARIO_I, reference_network, self.STOP_IDS, "mw_approach", (0.0,),
            stops=reference_stops,
        )
        (veh,) = defn.vehicles
        assert veh.id == "bundled"
        assert veh.vtype == "truck_double"
        assert [s.container_stop for s in veh.stops] == list(self.STOP_IDS)
        (route,) = defn.routes
        assert route.id == "route_bundled"
        assert route.edges == (
            "mw_approach", "exit_ramp", "a1", "side_uni_in", "side_uni_out",
            "a2", "a3", "side_dor_in", "side_dor_out", "a4",
        )

    def test_singles(self, reference_network, reference_stops):
        defn = build_scenario(
            SCENARIO_II, reference_network, self.STOP_IDS, "mw_approach", (0.0, 10.0),
            stops=reference_stops,
        )
        assert [v.id for v in defn.vehicles] == ["single_0", "single_1"]
        assert all(v.vtype == "truck_single" for v in defn.vehicles)
        assert [len(v.stops) for v in defn.vehicles] == [1, 1]
        assert [v.depart for v in defn.vehicles] == [0.0, 10.0]
        by_id = {r.id: r for r in defn.routes}
        # each single tour bypasses the other delivery's side street
        assert "a3b" in by_id["route_single_0"].edges
        assert "side_dor_in" not in by_id["route_single_0"].edges
        assert "a1b" in by_id["route_single_1"].edges
        assert "side_uni_in" not in by_id["route_single_1"].edges

    def test_stop_edges_promoted_to_main_street(self, reference_network, reference_stops):
        assert reference_network.edges["side_uni_in"].priority < MAIN_STREET_PRIORITY
        defn = build_scenario(
            SCENARIO_I, reference_network, self.STOP_IDS, "mw_approach", (0.0,),
            stops=reference_stops,
        )
        assert defn.network.edges["side_uni_in"].priority == MAIN_STREET_PRIORITY
        assert defn.network.edges["side_dor_in"].priority == MAIN_STREET_PRIORITY
        # the input network is untouched
        assert reference_network.edges["side_uni_in"].priority < MAIN_STREET_PRIORITY

    def test_deterministic_definition(self, reference_network, reference_stops):
        build = lambda: build_scenario(
            SCENARIO_I, reference_network, self.STOP_IDS, "mw_approach", (0.0,),
            stops=reference_stops,
        )
        assert build() == build()

    def test_depart_count_mismatch(self, reference_network, reference_stops):
        with pytest.raises(BadScenario):
            build_scenario(
                SCENARIO_II, reference_network, self.STOP_IDS, "mw_approach",
                (0.0, 10.0, 20.0), stops=reference_stops,
            )

    def test_no_stops(self, reference_network, reference_stops):
        with pytest.raises(BadScenario):
            build_scenario(
                SCENARIO_I, reference_network, (), "mw_approach", (0.0,),
                stops=reference_stops,
            )

    def test_unknown_stop(self, reference_network, reference_stops):
        with pytest.raises(BadScenario):
            build_scenario(
                SCENARIO_I, reference_network, ("nowhere",), "mw_approach", (0.0,),
                stops=reference_stops,
            )

    def test_missing_vehicle_class(self, reference_network, reference_stops):
        with pytest.raises(BadScenario):
            build_scenario(
                SCENARIO_I, reference_network, self.STOP_IDS, "mw_approach", (0.0,),
                stops=reference_stops,
                vtypes={"truck_single": DEFAULT_SINGLE_TRAILER},
            )


def fake_result(co2_mg: float, fuel_ml: float, travel: float, arrived=5.0) -> SimulationResult:
    return SimulationResult(
        t_end=100.0,
        truncated=False,
        accounts={"x": CumulativeAccount(co2_mg=co2_mg, fuel_ml=fuel_ml, duration_s=travel)},
        departed={"x": 0.0},
        arrived={"x": arrived},
        travel_times={"x": travel},
        distances={"x": 1000.0},
        trajectories={"x": []},
        detector_intervals=[],
    )


class TestCompare:
    def test_reduction_arithmetic(self):
        report = compare(fake_result(2e6, 500.0, 400.0), fake_result(4e6, 1000.0, 300.0))
        assert report.co2_reduction_pct == 50.0
        assert report.fuel_reduction_pct == 50.0
        assert report.time_delta_s == 100.0
        assert report.scenario_i.co2_kg == 2.0
        assert report.scenario_ii.fuel_l == 1.0

    def test_unfinished_vehicle_rejected(self):
        with pytest.raises(IncompleteResult):
            compare(fake_result(1e6, 1.0, 1.0, arrived=None), fake_result(1e6, 1.0, 1.0))

    def test_zero_baseline_guard(self):
        report = compare(fake_result(0.0, 0.0, 1.0), fake_result(0.0, 0.0, 1.0))
        assert report.co2_reduction_pct == 0.0
        assert report.fuel_reduction_pct == 0.0


class TestConfigLoading:
    def _write(self, tmp_path, payload: dict) -> str:
        p = tmp_path / "cmp.json"
        p.write_text(json.dumps(payload))
        return str(p)

    BASE = {
        "origin_edge": "mw_approach",
        "stops": ["spar_university", "spar_dornach"],
        "additional_file": "delivery.add.xml",
    }

    def test_minimal_with_defaults(self, tmp_path):
        cfg = load_comparison_config(self._write(tmp_path, self.BASE))
        assert cfg.origin_edge == "mw_approach"
        assert cfg.stop_ids == ("spar_university", "spar_dornach")
        assert cfg.additional_file == tmp_path / "delivery.add.xml"
        assert cfg.emissions_file is None
        assert cfg.departs_single is None
        assert (cfg.dwell_s, cfg.dt, cfg.seed, cfg.t_max) == (90.0, 1.0, 0, 3600.0)

    def test_relative_paths_anchor_at_config(self, tmp_path):
        sub = tmp_path / "deep"
        sub.mkdir()
        p = sub / "cmp.json"
        p.write_text(json.dumps({**self.BASE, "emissions_file": "../my.emis"}))
        cfg = load_comparison_config(p)
        assert cfg.additional_file == sub / "delivery.add.xml"
        assert cfg.emissions_file == sub / ".." / "my.emis"

    def test_unknown_key(self, tmp_path):
        with pytest.raises(BadScenario):
            load_comparison_config(self._write(tmp_path, {**self.BASE, "tls_offset": 5}))

    @pytest.mark.parametrize("missing", ["origin_edge", "stops", "additional_file"])
    def test_required_keys(self, tmp_path, missing):
        payload = {k: v for k, v in self.BASE.items() if k != missing}
        with pytest.raises(BadScenario):
            load_comparison_config(self._write(tmp_path, payload))

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "cmp.json"
        p.write_text("{nope")
        with pytest.raises(BadScenario):
            load_comparison_config(p)

    def test_stops_must_be_string_list(self, tmp_path):
        with pytest.raises(BadScenario):
            load_comparison_config(self._write(tmp_path, {**self.BASE, "stops": "spar"}))

    def test_shipped_config_loads(self, data_dir):
        cfg = load_comparison_config(data_dir / "scenario_compare.json")
        assert cfg.stop_ids == ("spar_university", "spar_dornach")
        assert cfg.additional_file.name == "delivery.add.xml"


@pytest.fixture(scope="module")
def outcome(data_dir, reference_network):
    cfg = load_comparison_config(data_dir / "scenario_compare.json")
    return run_comparison(reference_network, cfg)


class TestEndToEnd:
    def test_everyone_arrives(self, outcome):
        assert all(t is not None for t in outcome.result_i.arrived.values())
        assert all(t is not None for t in outcome.result_ii.arrived.values())

    def test_bundling_saves(self, outcome):
        rep = outcome.report
        assert rep.scenario_i.co2_kg < rep.scenario_ii.co2_kg
        assert rep.scenario_i.fuel_l < rep.scenario_ii.fuel_l
        assert 0.0 < rep.co2_reduction_pct < 100.0
        assert rep.scenario_i.distance_m == 2650.0
        assert rep.scenario_ii.distance_m == 5300.0

    def test_detector_rows_for_both(self, outcome):
        ids_i = {iv.id for iv in outcome.result_i.detector_intervals}
        assert ids_i == {"loop_city_in", "loop_tl", "loop_out"}
        assert {iv.id for iv in outcome.result_ii.detector_intervals} == ids_i

    def test_render_report_files(self, outcome, tmp_path):
        written = render_report(outcome, tmp_path / "out")
        names = sorted(p.name for p in written)
        assert names == [
            "co2_timeseries.csv",
            "comparison.svg",
            "detectors_scenario_I.xml",
            "detectors_scenario_II.xml",
            "fuel_timeseries.csv",
            "report.csv",
        ]
        report_lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
        assert report_lines[0] == REPORT_HEADER
        assert len(report_lines) == 4
        assert report_lines[1].startswith("scenario_I,")
        assert report_lines[3].startswith("reduction,")
        ts = (tmp_path / "out" / "co2_timeseries.csv").read_text().splitlines()
        assert ts[0] == TIMESERIES_HEADER
        assert len(ts) > 100

    def test_reductions_recomputable_from_report(self, outcome, tmp_path):
        render_report(outcome, tmp_path / "out")
        lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
        row_i = lines[1].split(",")
        row_ii = lines[2].split(",")
        row_red = lines[3].split(",")
        co2 = 100.0 * (1.0 - float(row_i[1]) / float(row_ii[1]))
        fuel = 100.0 * (1.0 - float(row_i[2]) / float(row_ii[2]))
        assert float(row_red[1]) == co2
        assert float(row_red[2]) == fuel

    def test_render_is_byte_deterministic(self, outcome, tmp_path):
        a = render_report(outcome, tmp_path / "a")
        b = render_report(outcome, tmp_path / "b")
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()
