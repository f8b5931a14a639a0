"""Trusted authority: record ingestion, reconciliation, replay detection, publication."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from .core import beacon_hex
from .device import PositiveDisclosure
from .totem import BeaconRecord, open_sealed_record, query_window

DEFAULT_EPSILON = 1
DEFAULT_V_MAX = 42.0


class MissingTotemPosition(KeyError):
    def __str__(self):
        return f"no position known for totem {self.args[0]!r}"


@dataclass(frozen=True)
class PublishedList:
    beacons: frozenset[bytes]
    published_at: float = 0.0

    def __len__(self):
        return len(self.beacons)

    def __contains__(self, beacon):
        return beacon in self.beacons


def merge_published(lists) -> PublishedList:
    """Union of several per-diagnosis lists, as a device would hold them."""
    lists = list(lists)
    beacons = frozenset().union(*(pl.beacons for pl in lists)) if lists else frozenset()
    return PublishedList(beacons, max((pl.published_at for pl in lists), default=0.0))


@dataclass
class AuthorityStore:
    records: set = field(default_factory=set)
    by_beacon: dict = field(default_factory=dict)
    by_totem_slot: dict = field(default_factory=dict)
    positives: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def add(self, rec: BeaconRecord) -> bool:
        if rec in self.records:
            return False
        self.records.add(rec)
        self.by_beacon.setdefault(rec.beacon, set()).add(rec)
        self.by_totem_slot.setdefault((rec.totem_id, rec.slot), set()).add(rec.beacon)
        return True


def ingest_records(store: AuthorityStore, batch) -> int:
    """Append a batch; returns how many new records were stored."""
    return sum(store.add(BeaconRecord(*rec)) for rec in batch)


def ingest_sealed(store: AuthorityStore, batch, authority_private) -> int:
    return ingest_records(store, (open_sealed_record(r, authority_private) for r in batch))


def ingest_positive(store: AuthorityStore, d: PositiveDisclosure, received_at: float = 0.0) -> bool:
    if len(d) == 0:
        raise ValueError("empty positive disclosure")
    beacons = d.beacons()
    if any(prev.beacons() == beacons for prev, _ in store.positives):
        return False
    store.positives.append((d, received_at))
    return True


def reconcile_centralized(store: AuthorityStore, d: PositiveDisclosure, epsilon: int = DEFAULT_EPSILON,
                          exclude=frozenset(), published_at: float = 0.0) -> PublishedList:
    """Publish every beacon recorded within ``epsilon`` slots of a positive sighting.

    Beacons in ``exclude`` (fraud flags) neither open windows nor appear as negatives.
    """
    out = set(d.beacons())
    for tau, b in d:
        if b in exclude:
            continue
        for rec in store.by_beacon.get(b, ()):
            if rec.slot != tau:
                continue
            for s in range(max(0, tau - epsilon), tau + epsilon + 1):
                out.update(x for x in store.by_totem_slot.get((rec.totem_id, s), ()) if x not in exclude)
    return PublishedList(frozenset(out), published_at)


def reconcile_decentralized(positives: PositiveDisclosure, totems, epsilon: int = DEFAULT_EPSILON,
                            unreachable=frozenset(), published_at: float = 0.0) -> PublishedList:
    """Push the positives to every reachable totem and union the answers."""
    out = set(positives.beacons())
    for totem in totems:
        if totem.totem_id in unreachable:
            continue
        out.update(rec.beacon for rec in query_window(totem, positives, epsilon))
    return PublishedList(frozenset(out), published_at)


def detect_fraud(store: AuthorityStore, v_max: float, totem_positions, slot_len: float) -> set[bytes]:
    """Beacons seen at two totems too far apart to be one traveller.

    A pair of sightings (t1, s1), (t2, s2) is infeasible when the totems are more
    than ``v_max * max(1, |s1 - s2|) * slot_len`` metres apart.
    """
    flagged = set()
    for beacon, recs in store.by_beacon.items():
        if len(recs) < 2:
            continue
        recs = sorted(recs)
        for i, (t1, s1, _) in enumerate(recs):
            for t2, s2, _ in recs[i + 1:]:
                if t1 == t2:
                    continue
                (x1, y1), (x2, y2) = _position(totem_positions, t1), _position(totem_positions, t2)
                reach = v_max * max(1, abs(s1 - s2)) * slot_len
                if math.hypot(x1 - x2, y1 - y2) > reach:
                    flagged.add(beacon)
                    break
            if beacon in flagged:
                break
    return flagged


def _position(positions, totem_id):
    try:
        return positions[totem_id]
    except KeyError:
        raise MissingTotemPosition(totem_id) from None


def shuffled_hex(pl: PublishedList, seed) -> list[str]:
    items = sorted(beacon_hex(b) for b in pl.beacons)
    random.Random(seed).shuffle(items)
    return items


def publish(pl: PublishedList, seed) -> str:
    """Serialize with a seeded shuffle; byte-stable for a given seed."""
    return json.dumps({"published_at": pl.published_at, "beacons": shuffled_hex(pl, seed)}) + "\n"
