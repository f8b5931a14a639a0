"""Edge totem: receives beacons, then forwards (centralized) or keeps them (decentralized)."""

from __future__ import annotations

import hashlib
import hmac
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import BEACON_SIZE, ProtocolMode, slot_of
from .secure_channel import DecryptionError, TotemKeys, decrypt_beacon, open_sealed, seal

log = logging.getLogger(__name__)


class BeaconRecord(NamedTuple):
    totem_id: str
    slot: int
    beacon: bytes


class SealedRecord(NamedTuple):
    """A record whose beacon is encrypted to the authority's public key."""
    totem_id: str
    slot: int
    blob: bytes


class ModeError(RuntimeError):
    pass


@dataclass
class TotemState:
    totem_id: str
    location: tuple[float, float]
    mode: ProtocolMode
    radio_range: float = 10.0
    slot_len: float = 600
    keys: TotemKeys | None = None
    encrypt_at_rest: bool = False
    authority_public: bytes | None = None
    rng: object = None
    local_store: set = field(default_factory=set)
    pending: dict = field(default_factory=dict)
    dropped: int = 0
    _by_slot: dict = field(default_factory=dict, repr=False)
    _tag_key: bytes = field(default=b"", repr=False)

    def __post_init__(self):
        self.mode = ProtocolMode(self.mode)
        if self.mode.encrypted and self.keys is None:
            raise ValueError(f"{self.totem_id}: privacy-enhanced mode needs a keypair")
        if self.encrypt_at_rest:
            if self.mode.stores_at_totem:
                raise ValueError(f"{self.totem_id}: encrypt_at_rest is only supported when forwarding to the authority")
            if self.authority_public is None or self.rng is None:
                raise ValueError(f"{self.totem_id}: encrypt_at_rest needs the authority public key and an rng")
            self._tag_key = self.rng.randbytes(32)

    def distance_to(self, x: float, y: float) -> float:
        return ((self.location[0] - x) ** 2 + (self.location[1] - y) ** 2) ** 0.5

    def in_range(self, x: float, y: float) -> bool:
        return self.distance_to(x, y) <= self.radio_range


def _dedup_key(state: TotemState, slot: int, beacon: bytes):
    if state.encrypt_at_rest:
        # only a keyed tag of the beacon stays in memory next to the sealed blob
        return hmac.new(state._tag_key, slot.to_bytes(8, "big") + beacon, hashlib.sha256).digest()
    return (slot, beacon)


def receive_beacon(state: TotemState, payload, now: float) -> bool:
    """Ingest one over-the-air payload. Returns False when it was dropped."""
    raw = getattr(payload, "payload", payload)
    if state.mode.encrypted:
        try:
            beacon = decrypt_beacon(state.keys, raw)
        except DecryptionError as exc:
            state.dropped += 1
            log.debug("%s dropped payload: %s", state.totem_id, exc)
            return False
    else:
        if len(raw) != BEACON_SIZE:
            state.dropped += 1
            return False
        beacon = bytes(raw)
    slot = slot_of(now, state.slot_len)
    if state.mode.stores_at_totem:
        rec = BeaconRecord(state.totem_id, slot, beacon)
        if rec not in state.local_store:
            state.local_store.add(rec)
            state._by_slot.setdefault(slot, set()).add(beacon)
        return True
    key = _dedup_key(state, slot, beacon)
    if key not in state.pending:
        if state.encrypt_at_rest:
            blob = seal(state.authority_public, beacon, state.rng, label=state.totem_id.encode())
            state.pending[key] = SealedRecord(state.totem_id, slot, blob)
        else:
            state.pending[key] = BeaconRecord(state.totem_id, slot, beacon)
    return True


def flush_centralized(state: TotemState) -> list:
    if state.mode.stores_at_totem:
        raise ModeError(f"{state.totem_id}: flush is only valid in centralized mode")
    out = sorted(state.pending.values(), key=lambda r: (r.slot, r[2]))
    state.pending.clear()
    if state.encrypt_at_rest:
        state._tag_key = state.rng.randbytes(32)
    return out


def query_window(state: TotemState, positives, epsilon: int) -> list[BeaconRecord]:
    """Negatives recorded here within ``epsilon`` slots of a positive seen here."""
    if not state.mode.stores_at_totem:
        raise ModeError(f"{state.totem_id}: window queries need locally stored records")
    out = set()
    for tau, b in positives:
        if b not in state._by_slot.get(tau, ()):
            continue
        for s in range(max(0, tau - epsilon), tau + epsilon + 1):
            for other in state._by_slot.get(s, ()):
                if other != b:
                    out.add(BeaconRecord(state.totem_id, s, other))
    return sorted(out)


def records(state: TotemState) -> list[BeaconRecord]:
    return sorted(state.local_store)


def compromise_probe(state: TotemState) -> list[bytes]:
    """Bytes an attacker with physical access would read from storage."""
    out = []
    for rec in list(state.pending.values()) + sorted(state.local_store):
        body = rec.blob if isinstance(rec, SealedRecord) else rec.beacon
        out.append(rec.totem_id.encode() + rec.slot.to_bytes(8, "big") + body)
    return out


def open_sealed_record(rec: SealedRecord, authority_private) -> BeaconRecord:
    beacon = open_sealed(authority_private, rec.blob, label=rec.totem_id.encode())
    return BeaconRecord(rec.totem_id, rec.slot, beacon)
