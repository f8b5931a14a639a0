"""Eavesdropping and replaying adversaries.

The global eavesdropper tags every payload it hears with a timestamp and the
emitter's position. Totem positions are public infrastructure, so the adversary
groups observations by the totem disc they fall in and by slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import slot_of
from .device import Transmission


class Observation(NamedTuple):
    payload: bytes
    t: float
    x: float
    y: float


@dataclass
class EavesdropLog:
    entries: list = field(default_factory=list)

    def append(self, payload: bytes, t: float, x: float, y: float) -> None:
        self.entries.append(Observation(bytes(payload), float(t), float(x), float(y)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def payloads(self) -> set[bytes]:
        return {o.payload for o in self.entries}


@dataclass(frozen=True)
class Inference:
    verdict: bool
    confidence: float | None
    k: int | None


class TrajectoryPoint(NamedTuple):
    x: float
    y: float
    t: float


def _published_union(lists) -> frozenset:
    if hasattr(lists, "beacons"):
        return lists.beacons
    out = set()
    for pl in lists:
        out |= getattr(pl, "beacons", pl)
    return frozenset(out)


def _totems_covering(totems, x, y) -> list[str]:
    return [tid for tid, (tx, ty, r) in totems.items() if math.hypot(tx - x, ty - y) <= r]


def _index_by_slot(log, published, slot_len):
    idx = {}
    for o in log:
        if o.payload in published:
            idx.setdefault(slot_of(o.t, slot_len), []).append(o)
    return idx


def reconstruct_cluster(log: EavesdropLog, published, obs: Observation, totems,
                        slot_len: float, epsilon: int, _index=None) -> set[bytes]:
    """Published payloads heard at the same totem(s) as ``obs`` within ``epsilon`` slots.

    ``totems`` maps totem id to ``(x, y, radio_range)``.
    """
    anchors = _totems_covering(totems, obs.x, obs.y)
    if not anchors:
        return {obs.payload}
    idx = _index if _index is not None else _index_by_slot(log, published, slot_len)
    tau = slot_of(obs.t, slot_len)
    cluster = {obs.payload}
    for s in range(tau - epsilon, tau + epsilon + 1):
        for o in idx.get(s, ()):
            for tid in anchors:
                tx, ty, r = totems[tid]
                if math.hypot(tx - o.x, ty - o.y) <= r:
                    cluster.add(o.payload)
                    break
    return cluster


def _clusters_for(log, published, target, totems, slot_len, epsilon):
    idx = _index_by_slot(log, published, slot_len)
    return [reconstruct_cluster(log, published, o, totems, slot_len, epsilon, idx)
            for o in log if o.payload == target]


def infer_health_status(log: EavesdropLog, lists, target_payloads, totems,
                        slot_len: float, epsilon: int) -> dict[bytes, Inference]:
    """Targeted health-status attack.

    A target is reported positive when its payload shows up in a published list;
    confidence is 1/k for the smallest co-located cluster containing it.
    """
    published = _published_union(lists)
    out = {}
    for target in sorted(set(target_payloads)):
        if target not in published:
            out[target] = Inference(False, None, None)
            continue
        ks = [len(c) for c in _clusters_for(log, published, target, totems, slot_len, epsilon)]
        k = min(ks) if ks else 1
        out[target] = Inference(True, 1.0 / k, k)
    return out


def pinpoint_positive(log: EavesdropLog, lists, target: bytes, totems, slot_len: float,
                      epsilon: int, order=None, rng=None) -> bytes | None:
    """Guess which member of the target's cluster is the diagnosed one.

    With ``order`` (the published serialization order) the guess is the first
    listed cluster member, which exploits any ordering leak; otherwise a uniform
    draw from ``rng``.
    """
    published = _published_union(lists)
    if target not in published:
        return None
    clusters = _clusters_for(log, published, target, totems, slot_len, epsilon)
    if not clusters:
        return target
    cluster = min(clusters, key=len)
    if order is not None:
        for b in order:
            if b in cluster:
                return b
    return sorted(cluster)[rng.randrange(len(cluster))]


def recover_trajectory(log: EavesdropLog, lists) -> list[TrajectoryPoint]:
    """Every place and time a published beacon was heard over the air."""
    published = _published_union(lists)
    points = {TrajectoryPoint(o.x, o.y, o.t) for o in log if o.payload in published}
    return sorted(points, key=lambda p: (p.t, p.x, p.y))


def replay_inject(log: EavesdropLog, victim_payload: bytes, target_totem: str, time: float) -> Transmission:
    """Re-emit a captured payload at ``target_totem``.

    The returned transmission is delivered by the simulator from the target
    totem's position, exactly like an honest broadcast.
    """
    if victim_payload not in log.payloads():
        raise LookupError("can only replay a payload present in the eavesdrop log")
    return Transmission(bytes(victim_payload), time)
