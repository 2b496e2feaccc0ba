"""Car-following dynamics: Krauss safe speed, obstacles, position updates.

Everything here is a pure state-transition function; the engine owns all
mutation and feeds in pre-step snapshots.  Geometry is one-dimensional along
a vehicle's route: a position is the route-linear coordinate of the front
bumper, edge by edge, with a single lane and no overtaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

from .net import Edge, GREEN, YELLOW

if TYPE_CHECKING:
    from .scenario_io import VehicleTypeSpec

__all__ = [
    "KraussParams",
    "VehiclePhase",
    "VehicleState",
    "RouteFrame",
    "Obstacle",
    "OBSTACLE_LEADER",
    "OBSTACLE_SIGNAL",
    "OBSTACLE_STOP",
    "HALT_EPS",
    "krauss_safe_speed",
    "free_flow_speed",
    "step_speed",
    "obstacle_ahead",
    "advance_position",
]

OBSTACLE_LEADER = "leader"
OBSTACLE_SIGNAL = "signal"
OBSTACLE_STOP = "stop"

# Speed below which a vehicle inside its stop bay counts as at rest.  Dwell
# must begin from (near) standstill: zeroing a fast vehicle on bay entry would
# brake it harder than decel_b and invalidate followers' safe-speed plans.
HALT_EPS = 0.05


@dataclass(frozen=True)
class KraussParams:
    """Model constants shared by all vehicles.

    tau is the driver reaction time, decel_b the comfortable deceleration
    assumed for the safe-speed bound, sigma the dawdling factor (0 disables
    the stochastic term entirely, making the update deterministic).
    """

    tau: float = 1.0
    decel_b: float = 4.5
    sigma: float = 0.0


class VehiclePhase(Enum):
    DRIVING = "driving"
    DWELLING = "dwelling"
    DONE = "done"


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle between steps."""

    id: str
    edge_index: int
    offset: float
    speed: float
    accel_applied: float
    phase: VehiclePhase
    dwell_remaining: float
    odometer: float
    departed_at: float
    arrived_at: float | None = None


@dataclass(frozen=True)
class RouteFrame:
    """A route resolved to edge objects plus cumulative start coordinates."""

    edges: tuple[Edge, ...]
    cum_start: tuple[float, ...]
    total: float

    @classmethod
    def from_edges(cls, edges: Sequence[Edge]) -> "RouteFrame":
        cum = []
        s = 0.0
        for e in edges:
            cum.append(s)
            s += e.length
        return cls(tuple(edges), tuple(cum), s)

    def linear(self, edge_index: int, offset: float) -> float:
        return self.cum_start[edge_index] + offset

    def locate(self, s: float) -> tuple[int, float]:
        """Map a route-linear coordinate back to (edge_index, offset)."""
        i = 0
        while i + 1 < len(self.edges) and s >= self.cum_start[i + 1]:
            i += 1
        return i, s - self.cum_start[i]


@dataclass(frozen=True)
class Obstacle:
    """Nearest movement constraint ahead of a vehicle.

    gap is measured from the front bumper to the constraint; for a real
    leader that is the raw bumper-to-rear distance before any minimum-gap
    deduction.  leader_speed is 0 for signals and container stops.
    """

    gap: float
    leader_speed: float
    kind: str


def krauss_safe_speed(gap: float, leader_speed: float, params: KraussParams) -> float:
    """Largest speed that still allows stopping behind the obstacle.

    Solves v*tau + v^2/(2b) <= gap + u^2/(2b) for v, which covers the worst
    case of the obstacle braking to a halt at rate b while the follower
    reacts after tau.
    """
    b, tau = params.decel_b, params.tau
    g = max(0.0, gap)
    u = max(0.0, leader_speed)
    v = -b * tau + math.sqrt(b * b * tau * tau + u * u + 2.0 * b * g)
    return max(0.0, v)


def free_flow_speed(speed_limit: float, vtype: "VehicleTypeSpec") -> float:
    """Desired unconstrained speed: the limit clamped into the type's band.

    The minimum-speed floor never overrides the posted limit upwards beyond
    it; a type with min_speed 5 on a 3 m/s edge targets 3 m/s.
    """
    return min(speed_limit, max(vtype.min_speed, min(vtype.max_speed, speed_limit)))


def step_speed(
    state: VehicleState,
    v_limit: float,
    v_safe: float,
    vtype: "VehicleTypeSpec",
    params: KraussParams,
    dt: float,
    noise: float,
) -> float:
    """One Krauss speed update; with sigma == 0 the noise draw is inert."""
    v_des = min(v_safe, v_limit, state.speed + vtype.accel * dt)
    dawdle = params.sigma * vtype.accel * dt * noise
    return max(0.0, state.speed - vtype.decel * dt, v_des - dawdle)


def obstacle_ahead(
    s: float,
    speed: float,
    frame: RouteFrame,
    signals: Mapping[str, str],
    stop_target: float | None,
    leaders: Sequence[tuple[float, float]],
    params: KraussParams,
) -> Obstacle | None:
    """Nearest constraint among leaders, signal stop lines, and a stop call.

    signals maps controlled edge ids to their current state character; a
    yellow light binds only if the vehicle can still stop in front of it
    (v^2/(2b) <= gap), otherwise it is treated as green.  stop_target is the
    route-linear halt position of the next unserved container stop, if any.
    leaders are (rear_bumper_s, speed) pairs of vehicles ahead on the route.

    Stop lines are scanned over the whole route and filtered by gap >= 0: a
    vehicle whose bumper sits exactly on the line (which edge normalization
    already assigns to the next edge) still holds at gap 0 until green.
    """
    candidates: list[Obstacle] = []
    for rear_s, leader_speed in leaders:
        gap = rear_s - s
        if gap >= 0.0:
            candidates.append(Obstacle(gap, leader_speed, OBSTACLE_LEADER))
    for k, edge in enumerate(frame.edges):
        state_char = signals.get(edge.id)
        if state_char is None or state_char == GREEN:
            continue
        line = frame.cum_start[k] + edge.length
        gap = line - s
        if gap < 0.0:
            continue
        if state_char == YELLOW and speed * speed / (2.0 * params.decel_b) > gap:
            continue  # too close to stop; pass through on yellow
        candidates.append(Obstacle(gap, 0.0, OBSTACLE_SIGNAL))
    if stop_target is not None and stop_target >= s:
        candidates.append(Obstacle(stop_target - s, 0.0, OBSTACLE_STOP))
    if not candidates:
        return None
    return min(candidates, key=lambda o: o.gap)


def advance_position(
    state: VehicleState,
    v_next: float,
    dt: float,
    frame: RouteFrame,
    now: float,
    stop_interval: tuple[float, float] | None = None,
    dwell: float = 0.0,
) -> VehicleState:
    """Move one vehicle forward by one step and handle phase transitions.

    stop_interval is the (start_s, end_s) window of the next unserved
    container stop.  The vehicle brakes toward end_s (its obstacle target)
    and starts dwelling once it comes to rest inside the bay; crossing end_s
    is intercepted as a backstop so a stop can never be overshot.  A dwelling
    vehicle only counts down.  Reaching the end of the last route edge
    finishes the trip at time ``now``.
    """
    if state.phase is VehiclePhase.DWELLING:
        remaining = state.dwell_remaining - dt
        if remaining <= 1e-9:
            return replace(state, phase=VehiclePhase.DRIVING, dwell_remaining=0.0,
                           speed=0.0, accel_applied=0.0)
        return replace(state, dwell_remaining=remaining, speed=0.0, accel_applied=0.0)

    if state.phase is not VehiclePhase.DRIVING:
        return state

    accel = (v_next - state.speed) / dt
    s = frame.linear(state.edge_index, state.offset)
    s_next = s + v_next * dt

    if stop_interval is not None and s < stop_interval[1]:
        start_s, end_s = stop_interval
        at_rest = v_next < HALT_EPS and s_next >= start_s
        if at_rest or s_next >= end_s:
            s_halt = min(s_next, end_s)
            i, offset = frame.locate(s_halt)
            return replace(
                state,
                edge_index=i,
                offset=offset,
                speed=0.0,
                accel_applied=(0.0 - state.speed) / dt,
                phase=VehiclePhase.DWELLING,
                dwell_remaining=dwell,
                odometer=state.odometer + (s_halt - s),
            )

    if s_next >= frame.total:
        last = len(frame.edges) - 1
        return replace(
            state,
            edge_index=last,
            offset=frame.edges[last].length,
            speed=v_next,
            accel_applied=accel,
            phase=VehiclePhase.DONE,
            odometer=state.odometer + (frame.total - s),
            arrived_at=now,
        )

    i, offset = frame.locate(s_next)
    return replace(
        state,
        edge_index=i,
        offset=offset,
        speed=v_next,
        accel_applied=accel,
        odometer=state.odometer + v_next * dt,
    )
