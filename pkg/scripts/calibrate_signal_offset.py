#!/usr/bin/env python3
"""Sweep traffic light offsets and report the bundled truck's stop time.

For each offset the bundled scenario runs once; the report lists the longest
contiguous span the truck spends below 0.1 m/s near the stop line of the
signalized edge (dwells at container stops excluded by position).  Used to
pick the offset frozen into scripts/build_reference_data.py.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from build_reference_data import DETECTORS, STOPS, build_reference_network

from bundlesim import compare, engine


def tl_stop_span(offset: float) -> tuple[float, float, float]:
    network = build_reference_network(offset)
    stops = {s.id: s for s in STOPS}
    defn = compare.build_scenario(
        compare.SCENARIO_I,
        network,
        ("spar_university", "spar_dornach"),
        "mw_approach",
        (0.0,),
        stops=stops,
    )
    world = engine.build_world(
        defn.network,
        list(defn.vtypes),
        list(defn.vehicles),
        list(defn.routes),
        detectors=list(DETECTORS),
        stops=STOPS,
        config=engine.SimulationConfig(record_trajectories=True),
    )
    result = engine.run(world)
    points = result.trajectories["bundled"]
    best = 0.0
    best_start = 0.0
    span_start = None
    prev_t = None
    for p in points:
        # at the stop line the position may normalize to the next edge's start
        at_line = (p.edge == "a2" and p.offset > 590.0) or (
            p.edge == "a3" and p.offset < 0.5
        )
        halted_at_light = p.speed < 0.1 and at_line
        if halted_at_light:
            if span_start is None:
                span_start = prev_t if prev_t is not None else p.t
        elif span_start is not None:
            if p.t - span_start > best:
                best = p.t - span_start
                best_start = span_start
            span_start = None
        prev_t = p.t
    if span_start is not None and points[-1].t - span_start > best:
        best = points[-1].t - span_start
        best_start = span_start
    return best, best_start, result.travel_times["bundled"]


def main() -> None:
    print("offset  stop_span  span_start  travel_time")
    for offset in range(0, 75):
        span, start, tt = tl_stop_span(float(offset))
        marker = " <---" if 25.0 <= span <= 35.0 else ""
        print(f"{offset:5d}  {span:9.1f}  {start:10.1f}  {tt:11.1f}{marker}")


if __name__ == "__main__":
    main()
