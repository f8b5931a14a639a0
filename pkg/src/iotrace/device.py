"""User device: transmit-only beaconing, positive disclosure, self-matching.

The device keeps no contact list. Its own beacon history is regenerated from
the key whenever it is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import DEFAULT_SLOT_LEN, DeviceKey, ProtocolMode, derive_beacon, derive_beacon_window, slot_of
from .secure_channel import Session, encrypt_beacon

DAY = 86400
DEFAULT_RISK_THRESHOLD = 900.0
DEFAULT_LOOKBACK_DAYS = 14
DEFAULT_BROADCAST_INTERVAL = 0.5


@dataclass(frozen=True)
class DeviceState:
    key: DeviceKey
    device_id: str
    risk_threshold: float = DEFAULT_RISK_THRESHOLD
    lookback_days: float = DEFAULT_LOOKBACK_DAYS
    slot_len: float = DEFAULT_SLOT_LEN

    def __post_init__(self):
        if not self.risk_threshold > 0:
            raise ValueError(f"risk_threshold must be positive, got {self.risk_threshold}")

    @property
    def lookback_seconds(self) -> float:
        return self.lookback_days * DAY

    def window(self, now: float) -> tuple[int, int]:
        """Slot range covered by the lookback ending at ``now``."""
        return (slot_of(max(0.0, now - self.lookback_seconds), self.slot_len),
                slot_of(now, self.slot_len))


@dataclass(frozen=True)
class Transmission:
    payload: bytes
    time: float


@dataclass(frozen=True)
class PositiveDisclosure:
    entries: tuple[tuple[int, bytes], ...]

    def beacons(self) -> frozenset[bytes]:
        return frozenset(b for _, b in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class ExposureReport:
    matched_slots: frozenset[int]
    exposure_seconds: float
    notified: bool

    @classmethod
    def from_matches(cls, slots, slot_len: float, threshold: float) -> "ExposureReport":
        slots = frozenset(slots)
        exposure = len(slots) * slot_len
        return cls(slots, exposure, exposure >= threshold)


def broadcast_tick(state: DeviceState, now: float, mode: ProtocolMode,
                   session: Session | None = None) -> Transmission:
    beacon = derive_beacon(state.key, slot_of(now, state.slot_len))
    if ProtocolMode(mode).encrypted:
        if session is None:
            raise ValueError("privacy-enhanced broadcasts need a totem session")
        return Transmission(encrypt_beacon(session, beacon), now)
    return Transmission(beacon, now)


def disclose_positive(state: DeviceState, diagnosis_time: float) -> PositiveDisclosure:
    if diagnosis_time < 0:
        raise ValueError("diagnosis_time must be non-negative")
    lo, hi = state.window(diagnosis_time)
    return PositiveDisclosure(tuple(derive_beacon_window(state.key, lo, hi)))


def match_published(state: DeviceState, published, now: float) -> ExposureReport:
    """Intersect the device's own lookback beacons with a published list.

    ``published`` is a PublishedList or any collection of beacons.
    """
    beacons = getattr(published, "beacons", published)
    if not beacons:
        return ExposureReport.from_matches((), state.slot_len, state.risk_threshold)
    lo, hi = state.window(now)
    own = derive_beacon_window(state.key, lo, hi)
    matched = [slot for slot, b in own if b in beacons]
    return ExposureReport.from_matches(matched, state.slot_len, state.risk_threshold)
