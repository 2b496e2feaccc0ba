"""Induction-loop detectors: point sensors aggregated into fixed windows.

A loop sits at a fixed position on an edge.  A vehicle registers once per
pass, on the rising edge: it was at or before the loop before a step and
strictly past it afterwards.  Crossings carry the step-start timestamp (the
same left-of-step convention as emission accounting) and are aggregated into
intervals of the detector's configured frequency; a trailing partial interval
is emitted when a run ends mid-window, recognizable by ``end - begin < freq``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

if TYPE_CHECKING:
    from .scenario_io import DetectorSpec


@dataclass(frozen=True)
class DetectorInterval:
    """One aggregation window of a single loop.

    ``mean_speed`` is -1.0 when no vehicle contributed; the emission sums are
    the instantaneous rates of the crossing vehicles integrated over one step
    each, i.e. a loop-sampled series, not a trip total.
    """

    id: str
    begin: float
    end: float
    n_veh: int
    mean_speed: float
    co2_mg: float
    fuel_ml: float


@dataclass(frozen=True)
class Crossing:
    vehicle: str
    t: float
    speed: float
    co2_rate: float
    fuel_rate: float


@dataclass(frozen=True)
class RouteTrace:
    """A vehicle's movement during one step, in its own route coordinates.

    ``cum_start[k]`` is the route-linear coordinate where the k-th route edge
    begins; positions are front-bumper offsets from the route start.
    """

    route_edges: tuple[str, ...]
    cum_start: tuple[float, ...]
    prev_s: float
    next_s: float


def detect_crossings(
    spec: "DetectorSpec",
    traces: Mapping[str, RouteTrace],
    rates: Mapping[str, tuple[float, float, float]],
    t: float,
) -> list[Crossing]:
    """Vehicles that passed the loop during the step starting at ``t``.

    ``rates`` maps vehicle id to (speed, co2_rate, fuel_rate) for the step.
    A route that visits the loop's edge several times yields one crossing per
    pass; a vehicle parked exactly on the loop does not fire until it leaves.
    """
    crossings = []
    for vid, trace in traces.items():
        for k, edge_id in enumerate(trace.route_edges):
            if edge_id != spec.edge:
                continue
            mark = trace.cum_start[k] + spec.pos
            if trace.prev_s <= mark < trace.next_s:
                speed, co2_rate, fuel_rate = rates[vid]
                crossings.append(Crossing(vid, t, speed, co2_rate, fuel_rate))
    return crossings


@dataclass
class DetectorRuntime:
    """Mutable aggregation state of one loop during a simulation."""

    spec: "DetectorSpec"
    dt: float = 1.0
    interval_begin: float = 0.0
    crossings: list[Crossing] = field(default_factory=list)
    emitted: list[DetectorInterval] = field(default_factory=list)

    def _aggregate(self, begin: float, end: float, crossings: list[Crossing]) -> DetectorInterval:
        # sort so that aggregation is independent of vehicle processing order
        batch = sorted(crossings, key=lambda c: (c.t, c.vehicle))
        n = len(batch)
        if n == 0:
            return DetectorInterval(self.spec.id, begin, end, 0, -1.0, 0.0, 0.0)
        return DetectorInterval(
            id=self.spec.id,
            begin=begin,
            end=end,
            n_veh=n,
            mean_speed=sum(c.speed for c in batch) / n,
            co2_mg=sum(c.co2_rate for c in batch) * self.dt,
            fuel_ml=sum(c.fuel_rate for c in batch) * self.dt,
        )

    def flush_interval(self, now: float) -> DetectorInterval | None:
        """Emit the current window if ``now`` has moved past it, else None."""
        if now - self.interval_begin < self.spec.freq:
            return None
        end = self.interval_begin + self.spec.freq
        interval = self._aggregate(self.interval_begin, end, self.crossings)
        self.emitted.append(interval)
        self.crossings = []
        self.interval_begin = end
        return interval

    def advance(self, now: float) -> None:
        """Close every full window up to ``now`` (empty windows included)."""
        while self.flush_interval(now) is not None:
            pass

    def record(self, crossing: Crossing) -> None:
        if not self.interval_begin <= crossing.t < self.interval_begin + self.spec.freq:
            raise ValueError(
                f"crossing at t={crossing.t} outside window starting {self.interval_begin}"
            )
        self.crossings.append(crossing)

    def intervals_at(self, now: float) -> list[DetectorInterval]:
        """All windows as of ``now``: emitted ones plus the in-flight tail.

        Pure view; does not mutate aggregation state, so a simulation can be
        inspected mid-run and continued.  The runtime's own clock lags the
        engine by one step (windows close at step starts), so any windows
        completed but not yet flushed are closed virtually here before the
        trailing partial is appended.
        """
        result = list(self.emitted)
        begin = self.interval_begin
        pending = list(self.crossings)
        while now - begin >= self.spec.freq:
            end = begin + self.spec.freq
            batch = [c for c in pending if c.t < end]
            pending = [c for c in pending if c.t >= end]
            result.append(self._aggregate(begin, end, batch))
            begin = end
        if now > begin:
            result.append(self._aggregate(begin, now, pending))
        return result
