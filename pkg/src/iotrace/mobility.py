"""Zone-hopping mobility: dwell, pick the next zone from a stochastic matrix, walk there."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple


class Zone(NamedTuple):
    zone_id: str
    x: float
    y: float
    radius: float
    covered: bool


class Segment(NamedTuple):
    """Linear motion from (x0, y0) at t0 to (x1, y1) at t1; a dwell when both points agree."""
    t0: float
    t1: float
    x0: float
    y0: float
    x1: float
    y1: float
    zone: int | None

    def position(self, t: float) -> tuple[float, float]:
        if self.t1 <= self.t0:
            return self.x1, self.y1
        a = min(1.0, max(0.0, (t - self.t0) / (self.t1 - self.t0)))
        return self.x0 + a * (self.x1 - self.x0), self.y0 + a * (self.y1 - self.y0)

    @property
    def moving(self) -> bool:
        return (self.x0, self.y0) != (self.x1, self.y1)


class MobilityError(ValueError):
    pass


def check_transition(matrix, n: int) -> list[list[float]]:
    if len(matrix) != n or any(len(row) != n for row in matrix):
        raise MobilityError(f"transition matrix must be {n}x{n}")
    for i, row in enumerate(matrix):
        if any(p < 0 for p in row):
            raise MobilityError(f"transition row {i} has a negative entry")
        if abs(math.fsum(row) - 1.0) > 1e-9:
            raise MobilityError(f"transition row {i} sums to {math.fsum(row)!r}, not 1")
    return [list(map(float, row)) for row in matrix]


@dataclass
class MobilityState:
    zones: list[Zone]
    transition: list[list[float]]
    dwell_mean: float
    speed: float
    zone: int
    x: float
    y: float
    t: float = 0.0
    segments: list = field(default_factory=list)

    def __post_init__(self):
        self.transition = check_transition(self.transition, len(self.zones))
        if self.dwell_mean <= 0:
            raise MobilityError(f"dwell_mean must be positive, got {self.dwell_mean}")
        if self.speed <= 0:
            raise MobilityError(f"speed must be positive, got {self.speed}")


def random_spot(zone: Zone, rng) -> tuple[float, float]:
    """Uniform point in the zone's disc."""
    r = zone.radius * math.sqrt(rng.random())
    a = 2 * math.pi * rng.random()
    return zone.x + r * math.cos(a), zone.y + r * math.sin(a)


def start(zones, transition, dwell_mean, speed, zone: int, rng) -> MobilityState:
    x, y = random_spot(zones[zone], rng)
    return MobilityState(list(zones), transition, dwell_mean, speed, zone, x, y)


def _choose(row, rng) -> int:
    u = rng.random()
    acc = 0.0
    for j, p in enumerate(row):
        acc += p
        if u < acc:
            return j
    return max(j for j, p in enumerate(row) if p > 0)


def next_position(state: MobilityState, rng) -> tuple[float, float]:
    """Dwell at the current spot, then jump along the transition matrix.

    Appends the dwell and (if the zone changes) the transit segment to
    ``state.segments`` and returns the new position.
    """
    dwell = rng.expovariate(1.0 / state.dwell_mean)
    t_leave = state.t + dwell
    state.segments.append(Segment(state.t, t_leave, state.x, state.y, state.x, state.y, state.zone))
    j = _choose(state.transition[state.zone], rng)
    state.t = t_leave
    if j != state.zone:
        nx, ny = random_spot(state.zones[j], rng)
        travel = math.hypot(nx - state.x, ny - state.y) / state.speed
        state.segments.append(Segment(state.t, state.t + travel, state.x, state.y, nx, ny, None))
        state.t += travel
        state.zone, state.x, state.y = j, nx, ny
    return state.x, state.y


def trajectory(state: MobilityState, rng, until: float) -> list[Segment]:
    while state.t < until:
        next_position(state, rng)
    return state.segments


def disc_interval(seg: Segment, cx: float, cy: float, r: float):
    """Closed time interval during which ``seg`` lies within the disc, or None."""
    if (min(seg.x0, seg.x1) > cx + r or max(seg.x0, seg.x1) < cx - r
            or min(seg.y0, seg.y1) > cy + r or max(seg.y0, seg.y1) < cy - r):
        return None
    dur = seg.t1 - seg.t0
    vx, vy = ((seg.x1 - seg.x0) / dur, (seg.y1 - seg.y0) / dur) if dur > 0 else (0.0, 0.0)
    a = vx * vx + vy * vy
    if a == 0.0:
        # stationary, or a displacement too small to represent as a speed
        if math.hypot(seg.x0 - cx, seg.y0 - cy) <= r:
            return seg.t0, seg.t1
        return None
    px, py = seg.x0 - cx, seg.y0 - cy
    b = 2 * (px * vx + py * vy)
    c = px * px + py * py - r * r
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    lo = seg.t0 + max(0.0, (-b - sq) / (2 * a))
    hi = seg.t0 + min(dur, (-b + sq) / (2 * a))
    if lo > hi:
        return None
    return lo, hi


def crossing_times(seg: Segment, discs) -> list[float]:
    """Times strictly inside ``seg`` at which it enters or leaves one of ``discs``."""
    out = []
    if not seg.moving:
        return out
    for cx, cy, r in discs:
        iv = disc_interval(seg, cx, cy, r)
        if iv is None:
            continue
        for t in iv:
            if seg.t0 < t < seg.t1:
                out.append(t)
    return out
