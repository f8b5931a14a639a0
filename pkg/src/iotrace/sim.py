"""Deterministic discrete-event simulation of one IoTrace deployment.

Devices hop between zones (totem neighbourhoods and uncovered venues). Each
device broadcasts every ``broadcast_interval`` seconds; because a beacon is
constant within a slot and totems coalesce per slot, the engine emits one
representative broadcast per device for every stretch of a slot during which
the set of totems in radio range stays the same. Later ticks of such a stretch
would be byte-identical (or, when encrypted, decrypt to the same record).

Event ties are broken by ``(time, phase, entity, sequence)``.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import adversary as adv
from .authority import (AuthorityStore, PublishedList, detect_fraud, ingest_positive, ingest_records,
                        ingest_sealed, merge_published, reconcile_centralized, reconcile_decentralized,
                        shuffled_hex)
from .core import DeviceKey, ProtocolMode, beacon_hex, derive_beacon_window, slot_of
from .device import DeviceState, PositiveDisclosure, Transmission, disclose_positive, match_published
from .metrics import CostModelParams, cost_report, histogram_csv, k_anonymity_profile, notification_accuracy
from .mobility import MobilityError, Zone, check_transition, crossing_times, disc_interval, start, trajectory
from .secure_channel import TotemDirectory, TotemKeys, encrypt_beacon, establish_session
from .totem import TotemState, flush_centralized, receive_beacon
from . import formats

PHASE_FLUSH, PHASE_RECONCILE, PHASE_EMIT, PHASE_DIAGNOSE = range(4)


class ConfigError(ValueError):
    """Invalid scenario; the message starts with the offending field path."""


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class TotemSpec:
    id: str
    x: float
    y: float
    radio_range: float


@dataclass(frozen=True)
class VenueSpec:
    id: str
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class MobilityConfig:
    transition: object = "uniform"
    dwell_mean: float = 1200.0
    speed: float = 1.4
    spot_fraction: float = 0.5
    initial_zones: tuple | None = None


@dataclass(frozen=True)
class Infection:
    device: int
    diagnosis_time: float


@dataclass(frozen=True)
class ReplaySpec:
    victim: int
    target_totem: str
    time: float


@dataclass(frozen=True)
class AdversaryConfig:
    coverage: object = "global"
    targets: tuple = ()
    replays: tuple = ()


@dataclass(frozen=True)
class SimConfig:
    seed: int
    duration: float
    totems: tuple
    device_count: int
    mode: ProtocolMode = ProtocolMode.CENTRALIZED
    slot_len: float = 600.0
    broadcast_interval: float = 0.5
    epsilon: int = 1
    risk_threshold: float = 900.0
    lookback_days: float = 14.0
    venues: tuple = ()
    mobility: MobilityConfig = MobilityConfig()
    infections: tuple = ()
    adversary: AdversaryConfig = AdversaryConfig()
    fraud_detection: bool = False
    v_max: float = 42.0
    unreachable_totems: tuple = ()
    encrypt_at_rest: bool = False
    energy: CostModelParams = CostModelParams()

    def __post_init__(self):
        validate(self)

    @property
    def n_slots(self) -> int:
        return math.ceil(self.duration / self.slot_len)

    def replace(self, **changes) -> "SimConfig":
        return SimConfig(**{**self.__dict__, **changes})

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return _parse_config(d)

    @classmethod
    def load(cls, path) -> "SimConfig":
        try:
            d = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
        try:
            return cls.from_dict(d)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed, "mode": self.mode.value, "duration": self.duration,
            "slot_len": self.slot_len, "broadcast_interval": self.broadcast_interval,
            "epsilon": self.epsilon, "risk_threshold": self.risk_threshold,
            "lookback_days": self.lookback_days,
            "totems": [asdict(t) for t in self.totems],
            "venues": [asdict(v) for v in self.venues],
            "devices": {"count": self.device_count, "mobility": asdict(self.mobility)},
            "infections": [asdict(i) for i in self.infections],
            "adversary": {"coverage": self.adversary.coverage, "targets": list(self.adversary.targets),
                          "replays": [asdict(r) for r in self.adversary.replays]},
            "fraud_detection": self.fraud_detection, "v_max": self.v_max,
            "unreachable_totems": list(self.unreachable_totems),
            "encrypt_at_rest": self.encrypt_at_rest, "energy": asdict(self.energy),
        }
        m = d["devices"]["mobility"]
        if m["initial_zones"] is not None:
            m["initial_zones"] = list(m["initial_zones"])
        return d


_MISSING = object()


def _get(d, key, path, kind=None, default=_MISSING):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in d:
        if default is _MISSING:
            raise ConfigError(f"{path}.{key}: missing field" if path else f"{key}: missing field")
        return default
    v = d[key]
    if v is None and default is None:
        return None
    where = f"{path}.{key}" if path else key
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where}: expected an integer")
    elif kind is not None and not isinstance(v, kind):
        raise ConfigError(f"{where}: expected {kind.__name__}")
    return v


def _parse_config(d: dict) -> SimConfig:
    totems = tuple(
        TotemSpec(_get(t, "id", f"totems[{i}]", str), _get(t, "x", f"totems[{i}]", float),
                  _get(t, "y", f"totems[{i}]", float), _get(t, "radio_range", f"totems[{i}]", float))
        for i, t in enumerate(_get(d, "totems", "", list)))
    venues = tuple(
        VenueSpec(_get(v, "id", f"venues[{i}]", str), _get(v, "x", f"venues[{i}]", float),
                  _get(v, "y", f"venues[{i}]", float), _get(v, "radius", f"venues[{i}]", float))
        for i, v in enumerate(_get(d, "venues", "", list, [])))
    dev = _get(d, "devices", "", dict)
    mob = _get(dev, "mobility", "devices", dict, {})
    init = _get(mob, "initial_zones", "devices.mobility", list, None)
    mobility = MobilityConfig(
        transition=_get(mob, "transition", "devices.mobility", None, "uniform"),
        dwell_mean=_get(mob, "dwell_mean", "devices.mobility", float, 1200.0),
        speed=_get(mob, "speed", "devices.mobility", float, 1.4),
        spot_fraction=_get(mob, "spot_fraction", "devices.mobility", float, 0.5),
        initial_zones=tuple(init) if init is not None else None)
    infections = tuple(
        Infection(_get(x, "device", f"infections[{i}]", int), _get(x, "diagnosis_time", f"infections[{i}]", float))
        for i, x in enumerate(_get(d, "infections", "", list, [])))
    a = _get(d, "adversary", "", dict, {})
    adversary = AdversaryConfig(
        coverage=_get(a, "coverage", "adversary", None, "global"),
        targets=tuple(_get(a, "targets", "adversary", list, [])),
        replays=tuple(
            ReplaySpec(_get(r, "victim", f"adversary.replays[{i}]", int),
                       _get(r, "target_totem", f"adversary.replays[{i}]", str),
                       _get(r, "time", f"adversary.replays[{i}]", float))
            for i, r in enumerate(_get(a, "replays", "adversary", list, []))))
    energy_d = _get(d, "energy", "", dict, {})
    try:
        energy = CostModelParams(**energy_d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"energy: {exc}") from exc
    mode = _get(d, "mode", "", str, "centralized")
    try:
        mode = ProtocolMode(mode)
    except ValueError:
        raise ConfigError(f"mode: unknown mode {mode!r}") from None
    return SimConfig(
        seed=_get(d, "seed", "", int),
        duration=_get(d, "duration", "", float),
        totems=totems,
        device_count=_get(dev, "count", "devices", int),
        mode=mode,
        slot_len=_get(d, "slot_len", "", float, 600.0),
        broadcast_interval=_get(d, "broadcast_interval", "", float, 0.5),
        epsilon=_get(d, "epsilon", "", int, 1),
        risk_threshold=_get(d, "risk_threshold", "", float, 900.0),
        lookback_days=_get(d, "lookback_days", "", float, 14.0),
        venues=venues, mobility=mobility, infections=infections, adversary=adversary,
        fraud_detection=_get(d, "fraud_detection", "", bool, False),
        v_max=_get(d, "v_max", "", float, 42.0),
        unreachable_totems=tuple(_get(d, "unreachable_totems", "", list, [])),
        encrypt_at_rest=_get(d, "encrypt_at_rest", "", bool, False),
        energy=energy)


def validate(c: SimConfig) -> None:
    object.__setattr__(c, "mode", ProtocolMode(c.mode))
    for name in ("duration", "slot_len", "broadcast_interval", "v_max"):
        if not getattr(c, name) > 0:
            raise ConfigError(f"{name}: must be positive")
    if c.epsilon < 0:
        raise ConfigError("epsilon: must be non-negative")
    if not c.risk_threshold > 0:
        raise ConfigError("risk_threshold: must be positive")
    if c.lookback_days < 0:
        raise ConfigError("lookback_days: must be non-negative")
    ratio = c.slot_len / c.broadcast_interval
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError("slot_len: must be a whole number of broadcast intervals")
    if c.device_count < 1:
        raise ConfigError("devices.count: must be at least 1")
    ids = [t.id for t in c.totems] + [v.id for v in c.venues]
    if len(set(ids)) != len(ids):
        raise ConfigError("totems/venues: ids must be unique")
    if not ids:
        raise ConfigError("totems: need at least one zone (totem or venue)")
    for i, t in enumerate(c.totems):
        if not t.radio_range > 0:
            raise ConfigError(f"totems[{i}].radio_range: must be positive")
    for i, v in enumerate(c.venues):
        if not v.radius > 0:
            raise ConfigError(f"venues[{i}].radius: must be positive")
    m = c.mobility
    if not m.dwell_mean > 0:
        raise ConfigError("devices.mobility.dwell_mean: must be positive")
    if not m.speed > 0:
        raise ConfigError("devices.mobility.speed: must be positive")
    if not 0 <= m.spot_fraction <= 1:
        raise ConfigError("devices.mobility.spot_fraction: must lie in [0, 1]")
    n_zones = len(ids)
    if m.transition != "uniform":
        try:
            check_transition(m.transition, n_zones)
        except (MobilityError, TypeError) as exc:
            raise ConfigError(f"devices.mobility.transition: {exc}") from None
    if m.initial_zones is not None:
        if len(m.initial_zones) != c.device_count:
            raise ConfigError("devices.mobility.initial_zones: need one zone per device")
        if any(not isinstance(z, int) or not 0 <= z < n_zones for z in m.initial_zones):
            raise ConfigError("devices.mobility.initial_zones: zone index out of range")
    seen = set()
    for i, inf in enumerate(c.infections):
        if not 0 <= inf.device < c.device_count:
            raise ConfigError(f"infections[{i}].device: no device {inf.device}")
        if not 0 <= inf.diagnosis_time < c.duration:
            raise ConfigError(f"infections[{i}].diagnosis_time: must lie in [0, duration)")
        if inf.device in seen:
            raise ConfigError(f"infections[{i}].device: device {inf.device} diagnosed twice")
        seen.add(inf.device)
    totem_ids = {t.id for t in c.totems}
    for i, t in enumerate(c.adversary.targets):
        if not isinstance(t, int) or not 0 <= t < c.device_count:
            raise ConfigError(f"adversary.targets[{i}]: no device {t}")
    for i, r in enumerate(c.adversary.replays):
        if not 0 <= r.victim < c.device_count:
            raise ConfigError(f"adversary.replays[{i}].victim: no device {r.victim}")
        if r.target_totem not in totem_ids:
            raise ConfigError(f"adversary.replays[{i}].target_totem: unknown totem {r.target_totem!r}")
        if not 0 <= r.time < c.duration:
            raise ConfigError(f"adversary.replays[{i}].time: must lie in [0, duration)")
    cov = c.adversary.coverage
    if cov != "global":
        if not isinstance(cov, (list, tuple)) or not all(
                isinstance(a, dict) and {"x", "y", "radius"} <= set(a) for a in cov):
            raise ConfigError("adversary.coverage: 'global' or a list of {x, y, radius}")
    for tid in c.unreachable_totems:
        if tid not in totem_ids:
            raise ConfigError(f"unreachable_totems: unknown totem {tid!r}")
    if c.fraud_detection and c.mode is not ProtocolMode.CENTRALIZED:
        raise ConfigError("fraud_detection: only available in centralized mode")
    if c.encrypt_at_rest and c.mode is not ProtocolMode.CENTRALIZED:
        raise ConfigError("encrypt_at_rest: only available in centralized mode")
    if c.unreachable_totems and c.mode is ProtocolMode.CENTRALIZED:
        raise ConfigError("unreachable_totems: only meaningful when totems keep records")


def substream(seed: int, *labels) -> random.Random:
    """Independent, reproducible RNG stream for one purpose within a run."""
    h = hashlib.sha256(repr((seed,) + labels).encode()).digest()
    return random.Random(int.from_bytes(h[:16], "big"))


def device_id(i: int) -> str:
    return f"D-{i:04d}"


# ---------------------------------------------------------------------------
# ground truth

@dataclass
class GroundTruth:
    trajectories: dict
    presence: set            # (device, totem, slot)
    venue_presence: set      # (device, venue, slot)
    contacts: set            # device ids a correct protocol must notify
    exposure_slots: dict     # device id -> slots a correct protocol must match
    coverage_missed: set     # devices physically exposed only at uncovered venues
    transmissions: dict      # (device, totem, slot) -> first delivery time

    def co_presence(self, epsilon: int) -> set:
        """Unordered device pairs seen at one totem within ``epsilon`` slots of each other."""
        by_place = {}
        for d, t, s in self.presence:
            by_place.setdefault(t, []).append((s, d))
        pairs = set()
        for items in by_place.values():
            items.sort()
            for i, (s1, d1) in enumerate(items):
                for s2, d2 in items[i + 1:]:
                    if s2 - s1 > epsilon:
                        break
                    if d1 != d2:
                        pairs.add(frozenset((d1, d2)))
        return pairs


def presence_from_segments(segments, totems, broadcast_interval, slot_len, duration) -> set:
    """(totem, slot) pairs with at least one broadcast tick inside the totem's disc."""
    out = set()
    last_tick = math.ceil(duration / broadcast_interval) - 1
    for t in totems:
        for seg in segments:
            iv = disc_interval(seg, t.x, t.y, t.radio_range)
            if iv is None:
                continue
            lo = max(math.ceil(iv[0] / broadcast_interval - 1e-12), 0)
            hi = min(math.floor(iv[1] / broadcast_interval + 1e-12), last_tick)
            if lo > hi:
                continue
            for s in range(slot_of(lo * broadcast_interval, slot_len), slot_of(hi * broadcast_interval, slot_len) + 1):
                out.add((t.id, s))
    return out


def _exposures(presence_idx, positives_of, window_of, epsilon, diagnosed):
    """Slots at which each undiagnosed device shared a place with a positive sighting window."""
    exposed = {}
    for p, slots in positives_of.items():
        for (place, tau) in slots:
            for s in range(max(0, tau - epsilon), tau + epsilon + 1):
                for q in presence_idx.get((place, s), ()):
                    if q in diagnosed:
                        continue
                    lo, hi = window_of(q)
                    if lo <= s <= hi:
                        exposed.setdefault(q, set()).add(s)
    return exposed


def ground_truth(cfg: SimConfig, trajectories, devices, transmissions) -> GroundTruth:
    presence = set()
    for dev, segs in trajectories.items():
        for t, s in presence_from_segments(segs, cfg.totems, cfg.broadcast_interval, cfg.slot_len, cfg.duration):
            presence.add((dev, t, s))
    venue_presence = set()
    n_totems = len(cfg.totems)
    for dev, segs in trajectories.items():
        for seg in segs:
            if seg.zone is None or seg.zone < n_totems or seg.t0 >= cfg.duration:
                continue
            v = cfg.venues[seg.zone - n_totems]
            end = min(seg.t1, cfg.duration)
            for s in range(slot_of(seg.t0, cfg.slot_len), slot_of(max(seg.t0, end - 1e-9), cfg.slot_len) + 1):
                venue_presence.add((dev, v.id, s))

    diagnosed = {device_id(i.device) for i in cfg.infections}
    by_dev = {d.device_id: d for d in devices}

    def disclosed_slots(inf):
        return by_dev[device_id(inf.device)].window(inf.diagnosis_time)

    def positive_places(table):
        out = {}
        for inf in cfg.infections:
            p = device_id(inf.device)
            lo, hi = disclosed_slots(inf)
            out[p] = {(place, s) for d, place, s in table if d == p and lo <= s <= hi}
        return out

    def index(table):
        idx = {}
        for d, place, s in table:
            idx.setdefault((place, s), set()).add(d)
        return idx

    end_window = lambda q: by_dev[q].window(cfg.duration)  # noqa: E731
    exposed = _exposures(index(presence), positive_places(presence), end_window, cfg.epsilon, diagnosed)
    physical_table = presence | venue_presence
    physical = _exposures(index(physical_table), positive_places(physical_table), end_window,
                          cfg.epsilon, diagnosed)
    contacts = {q for q, s in exposed.items() if len(s) * cfg.slot_len >= cfg.risk_threshold}
    physically = {q for q, s in physical.items() if len(s) * cfg.slot_len >= cfg.risk_threshold}
    return GroundTruth(trajectories, presence, venue_presence, contacts, exposed,
                       physically - contacts, transmissions)


# ---------------------------------------------------------------------------
# engine

@dataclass
class Publication:
    device: str
    diagnosis_time: float
    disclosure: PositiveDisclosure
    published: PublishedList
    order: list
    seed: int
    flagged: frozenset = frozenset()
    unreachable: tuple = ()


@dataclass
class Injection:
    victim: str
    target_totem: str
    time: float
    slot: int
    payload: bytes | None
    delivered_to: tuple = ()
    exceeds_bound: bool = False


@dataclass
class SimOutput:
    config: SimConfig
    ground_truth: GroundTruth
    records: list
    publications: list
    exposures: dict
    eavesdrop: adv.EavesdropLog
    targeted: dict
    injections: list
    fraud_flags: frozenset
    attacks: dict
    drops: dict
    metrics: dict = field(default_factory=dict)

    @property
    def notified(self) -> set:
        return {d for d, r in self.exposures.items() if r.notified}


def _zones(cfg: SimConfig) -> list[Zone]:
    zones = [Zone(t.id, t.x, t.y, t.radio_range * cfg.mobility.spot_fraction, True) for t in cfg.totems]
    zones += [Zone(v.id, v.x, v.y, v.radius, False) for v in cfg.venues]
    return zones


def _transition(cfg, n):
    if cfg.mobility.transition == "uniform":
        return [[1.0 / n] * n for _ in range(n)]
    return cfg.mobility.transition


def build_trajectories(cfg: SimConfig) -> dict:
    zones = _zones(cfg)
    matrix = _transition(cfg, len(zones))
    out = {}
    for i in range(cfg.device_count):
        rng = substream(cfg.seed, "mobility", i)
        z0 = cfg.mobility.initial_zones[i] if cfg.mobility.initial_zones is not None else rng.randrange(len(zones))
        st = start(zones, matrix, cfg.mobility.dwell_mean, cfg.mobility.speed, z0, rng)
        out[device_id(i)] = trajectory(st, rng, cfg.duration)
    return out


def emission_schedule(segments, totems, cfg: SimConfig):
    """Yield ``(tick_time, x, y, in_range_totem_ids)`` for one device."""
    bi, sl = cfg.broadcast_interval, cfg.slot_len
    discs = [(t.x, t.y, t.radio_range) for t in totems]
    last = None
    for seg in segments:
        if seg.t0 >= cfg.duration:
            break
        t_end = min(seg.t1, cfg.duration)
        marks = {seg.t0}
        marks.update(crossing_times(seg, discs))
        k = math.floor(seg.t0 / sl) + 1
        while k * sl < t_end:
            marks.add(k * sl)
            k += 1
        marks = sorted(m for m in marks if m < t_end)
        for a, b in zip(marks, marks[1:] + [t_end]):
            tick = math.ceil(a / bi - 1e-12) * bi
            if tick >= b or tick >= cfg.duration:
                continue
            x, y = seg.position(tick)
            here = tuple(t.id for t in totems if math.hypot(t.x - x, t.y - y) <= t.radio_range)
            key = (slot_of(tick, sl), here)
            if key != last:
                last = key
                yield tick, x, y, here


class _Engine:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.mode = cfg.mode
        key_rng = substream(cfg.seed, "keys")
        self.devices = [
            DeviceState(DeviceKey.generate(key_rng, device_id(i)), device_id(i),
                        cfg.risk_threshold, cfg.lookback_days, cfg.slot_len)
            for i in range(cfg.device_count)]
        self.crypto_rng = substream(cfg.seed, "crypto")
        self.authority_keys = TotemKeys.generate("authority", substream(cfg.seed, "authority"))
        keys = [TotemKeys.generate(t.id, substream(cfg.seed, "totem-key", t.id)) for t in cfg.totems]
        self.directory = TotemDirectory.from_keys(keys) if keys else TotemDirectory({})
        self.totems = {
            t.id: TotemState(t.id, (t.x, t.y), cfg.mode, t.radio_range, cfg.slot_len, keys=k,
                             encrypt_at_rest=cfg.encrypt_at_rest,
                             authority_public=self.authority_keys.public_bytes if cfg.encrypt_at_rest else None,
                             rng=substream(cfg.seed, "at-rest", t.id) if cfg.encrypt_at_rest else None)
            for t, k in zip(cfg.totems, keys)}
        self.store = AuthorityStore()
        self.sessions = {}
        self.log = adv.EavesdropLog()
        self.targets = set(cfg.adversary.targets) | {r.victim for r in cfg.adversary.replays}
        self.targeted = {device_id(i): [] for i in sorted(self.targets)}
        self.publications = []
        self.injections = []
        self.transmissions = {}
        self.flagged = set()
        self._beacon_cache = {}

    # -- helpers
    def covered(self, x, y) -> bool:
        cov = self.cfg.adversary.coverage
        if cov == "global":
            return True
        return any(math.hypot(a["x"] - x, a["y"] - y) <= a["radius"] for a in cov)

    def beacon(self, idx: int, slot: int) -> bytes:
        table = self._beacon_cache.get(idx)
        if table is None:
            # one bulk derivation per device covers the whole run
            dev = self.devices[idx]
            table = self._beacon_cache[idx] = [b for _, b in derive_beacon_window(dev.key, 0, self.cfg.n_slots)]
        return table[slot]

    def deliver(self, tx: Transmission, recipients):
        return [tid for tid in recipients if receive_beacon(self.totems[tid], tx, tx.time)]

    def in_range(self, x, y):
        return [tid for tid, t in self.totems.items() if t.in_range(x, y)]

    # -- event handlers
    def emit(self, idx: int, tick: float, x: float, y: float, here):
        dev = self.devices[idx]
        slot = slot_of(tick, self.cfg.slot_len)
        # same payloads as broadcast_tick, with the beacon taken from the precomputed table
        beacon = self.beacon(idx, slot)
        if self.mode.encrypted:
            payloads = []
            for tid in here:
                skey = (dev.device_id, tid, slot)
                sess = self.sessions.get(skey)
                if sess is None:
                    sess = self.sessions[skey] = establish_session(self.directory, tid, self.crypto_rng, slot)
                payloads.append(Transmission(encrypt_beacon(sess, beacon), tick))
        else:
            payloads = [Transmission(beacon, tick)]
        for tx in payloads:
            for tid in self.deliver(tx, here):
                self.transmissions.setdefault((dev.device_id, tid, slot), tick)
            if self.covered(x, y):
                self.log.append(tx.payload, tick, x, y)
            if idx in self.targets:
                self.targeted[dev.device_id].append((tick, tx.payload))

    def flush(self):
        if self.mode.stores_at_totem:
            return
        for tid in sorted(self.totems):
            batch = flush_centralized(self.totems[tid])
            if self.cfg.encrypt_at_rest:
                ingest_sealed(self.store, batch, self.authority_keys.private_key)
            else:
                ingest_records(self.store, batch)

    def diagnose(self, inf, t):
        dev = self.devices[inf.device]
        d = disclose_positive(dev, inf.diagnosis_time)
        ingest_positive(self.store, d, t)
        return d

    def reconcile(self, inf, d: PositiveDisclosure, at: float):
        cfg = self.cfg
        n = len(self.publications)
        seed = int.from_bytes(hashlib.sha256(repr((cfg.seed, "publish", n)).encode()).digest()[:8], "big")
        flagged = frozenset()
        unreachable = ()
        if self.mode is ProtocolMode.CENTRALIZED:
            if cfg.fraud_detection:
                positions = {t.id: (t.x, t.y) for t in cfg.totems}
                flagged = frozenset(detect_fraud(self.store, cfg.v_max, positions, cfg.slot_len))
                self.flagged |= flagged
            pl = reconcile_centralized(self.store, d, cfg.epsilon, exclude=flagged, published_at=at)
        else:
            unreachable = tuple(sorted(cfg.unreachable_totems))
            pl = reconcile_decentralized(d, [self.totems[k] for k in sorted(self.totems)], cfg.epsilon,
                                         unreachable=frozenset(unreachable), published_at=at)
        order = [bytes.fromhex(h) for h in shuffled_hex(pl, seed)]
        self.publications.append(Publication(device_id(inf.device), inf.diagnosis_time, d, pl, order, seed,
                                             flagged, unreachable))

    def replay(self, r: ReplaySpec):
        cfg = self.cfg
        victim = device_id(r.victim)
        captured = [p for t, p in self.targeted[victim] if t <= r.time]
        slot = slot_of(r.time, cfg.slot_len)
        if not captured:
            self.injections.append(Injection(victim, r.target_totem, r.time, slot, None))
            return
        payload = captured[-1]
        spec = next(t for t in cfg.totems if t.id == r.target_totem)
        captures = adv.EavesdropLog()
        captures.append(payload, r.time, spec.x, spec.y)
        tx = adv.replay_inject(captures, payload, r.target_totem, r.time)
        got = self.deliver(tx, self.in_range(spec.x, spec.y))
        honest = {tid for (d, tid, s) in self.transmissions if d == victim and s == slot}
        reach = cfg.v_max * cfg.slot_len
        exceeds = any(math.hypot(spec.x - o.x, spec.y - o.y) > reach
                      for o in cfg.totems if o.id in honest and o.id != spec.id)
        self.injections.append(Injection(victim, r.target_totem, r.time, slot, payload, tuple(got), exceeds))

    # -- main loop
    def run(self) -> SimOutput:
        cfg = self.cfg
        trajectories = build_trajectories(cfg)
        events = []
        seq = 0

        def push(t, phase, entity, kind, data):
            nonlocal seq
            heapq.heappush(events, (t, phase, entity, seq, kind, data))
            seq += 1

        for i in range(cfg.device_count):
            for tick, x, y, here in emission_schedule(trajectories[device_id(i)], cfg.totems, cfg):
                push(tick, PHASE_EMIT, device_id(i), "emit", (i, x, y, here))
        for r in cfg.adversary.replays:
            push(r.time, PHASE_EMIT, "~adversary", "replay", r)
        if not self.mode.stores_at_totem:
            for k in range(1, cfg.n_slots):
                push(k * cfg.slot_len, PHASE_FLUSH, "", "flush", None)
        push(cfg.duration, PHASE_FLUSH, "", "flush", None)
        for inf in cfg.infections:
            push(inf.diagnosis_time, PHASE_DIAGNOSE, device_id(inf.device), "diagnose", inf)

        while events:
            t, _, _, _, kind, data = heapq.heappop(events)
            if kind == "emit":
                self.emit(data[0], t, data[1], data[2], data[3])
            elif kind == "flush":
                self.flush()
            elif kind == "replay":
                self.replay(data)
            elif kind == "diagnose":
                d = self.diagnose(data, t)
                at = min((slot_of(data.diagnosis_time, cfg.slot_len) + cfg.epsilon + 1) * cfg.slot_len, cfg.duration)
                push(at, PHASE_RECONCILE, device_id(data.device), "reconcile", (data, d))
            elif kind == "reconcile":
                self.reconcile(data[0], data[1], t)

        return self._finish(trajectories)

    def _finish(self, trajectories) -> SimOutput:
        cfg = self.cfg
        if self.mode.stores_at_totem:
            records = sorted(r for t in self.totems.values() for r in t.local_store)
        else:
            records = sorted(self.store.records)
        lists = [p.published for p in self.publications]
        merged = merge_published(lists)
        diagnosed = {device_id(i.device) for i in cfg.infections}
        exposures = {d.device_id: match_published(d, merged, cfg.duration)
                     for d in self.devices if d.device_id not in diagnosed}
        gt = ground_truth(cfg, trajectories, self.devices, self.transmissions)
        out = SimOutput(cfg, gt, records, self.publications, exposures, self.log, self.targeted,
                        self.injections, frozenset(self.flagged), {},
                        {tid: t.dropped for tid, t in sorted(self.totems.items())})
        out.attacks = run_attacks(out)
        out.metrics = compute_metrics(out)
        return out


def run(config: SimConfig) -> SimOutput:
    return _Engine(config).run()


# ---------------------------------------------------------------------------
# attacks and metrics over a finished run

def totem_geometry(cfg: SimConfig) -> dict:
    return {t.id: (t.x, t.y, t.radio_range) for t in cfg.totems}


def run_attacks(out: SimOutput) -> dict:
    cfg = out.config
    lists = [p.published for p in out.publications]
    geometry = totem_geometry(cfg)
    positives = set().union(*(p.disclosure.beacons() for p in out.publications)) if out.publications else set()
    order = [b for p in out.publications for b in p.order]
    health = {}
    for dev, captures in sorted(out.targeted.items()):
        payloads = {p for _, p in captures}
        inf = adv.infer_health_status(out.eavesdrop, lists, payloads, geometry, cfg.slot_len, cfg.epsilon)
        hits = {p: v for p, v in inf.items() if v.verdict}
        entry = {"verdict": bool(hits), "k": None, "confidence": None, "pinpoint": None,
                 "pinpoint_correct": None}
        if hits:
            target, best = min(hits.items(), key=lambda kv: (kv[1].k, kv[0]))
            guess = adv.pinpoint_positive(out.eavesdrop, lists, target, geometry, cfg.slot_len, cfg.epsilon,
                                          order=order)
            entry.update(k=best.k, confidence=best.confidence, pinpoint=guess.hex(),
                         pinpoint_correct=guess in positives)
        health[dev] = entry
    trajectory_points = adv.recover_trajectory(out.eavesdrop, lists)
    published = merge_published(lists).beacons
    return {
        "health_status": health,
        "trajectory": [list(p) for p in trajectory_points],
        "wire_published_overlap": len(out.eavesdrop.payloads() & published),
    }


def compute_metrics(out: SimOutput) -> dict:
    cfg = out.config
    m = {
        "k_anonymity": k_anonymity_profile(out),
        "notification": notification_accuracy(out),
        "cost": cost_report(cfg.energy, cfg.duration, scan_enabled=False),
        "protocol": {
            "records": len(out.records),
            "publications": len(out.publications),
            "published_beacons": len(merge_published(p.published for p in out.publications)),
            "fraud_flags": len(out.fraud_flags),
            "dropped_payloads": sum(out.drops.values()),
            "unreachable_totems": sorted(set().union(*(p.unreachable for p in out.publications)))
            if out.publications else [],
            "eavesdropped": len(out.eavesdrop),
        },
        "replay": {
            "injected": sum(1 for i in out.injections if i.payload is not None),
            "cross_totem_infeasible": sum(1 for i in out.injections if i.exceeds_bound),
            "flagged": sum(1 for i in out.injections if i.exceeds_bound and i.payload in out.fraud_flags),
        },
        "coverage": _coverage(out),
    }
    return m


def _coverage(out: SimOutput) -> dict:
    """Share of device-slots spent inside some totem's range."""
    cfg = out.config
    covered = {(d, s) for d, _, s in out.ground_truth.presence}
    total = cfg.device_count * cfg.n_slots
    return {"device_slots_covered": len(covered), "device_slots": total,
            "fraction": len(covered) / total if total else None}


# ---------------------------------------------------------------------------
# serialization

def write_output(out: SimOutput, directory) -> list[Path]:
    """Write every artifact of a run; returns the paths written."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {}
    files["config.json"] = formats.dumps(out.config.to_dict())
    files["records.jsonl"] = formats.dump_records(out.records)
    for n, p in enumerate(out.publications):
        files[f"disclosure-{n:03d}-{p.device}.json"] = formats.dump_disclosure(p.disclosure)
        files[f"published-{n:03d}.json"] = formats.dumps(
            {"published_at": p.published.published_at, "beacons": [b.hex() for b in p.order]})
    files["exposures.json"] = formats.dumps({k: formats.report_to_json(v) for k, v in sorted(out.exposures.items())})
    files["eavesdrop.jsonl"] = formats.dump_eavesdrop(out.eavesdrop)
    files["attack_report.json"] = formats.dumps({
        **out.attacks,
        "replays": [{"victim": i.victim, "target_totem": i.target_totem, "time": i.time, "slot": i.slot,
                     "payload": i.payload.hex() if i.payload else None, "delivered_to": list(i.delivered_to),
                     "exceeds_bound": i.exceeds_bound} for i in out.injections],
    })
    files["fraud_flags.json"] = formats.dumps(sorted(beacon_hex(b) for b in out.fraud_flags))
    gt = out.ground_truth
    files["ground_truth.json"] = formats.dumps({
        "presence": sorted([d, t, s] for d, t, s in gt.presence),
        "venue_presence": sorted([d, v, s] for d, v, s in gt.venue_presence),
        "contacts": sorted(gt.contacts),
        "coverage_missed": sorted(gt.coverage_missed),
        "diagnosed": sorted(device_id(i.device) for i in out.config.infections),
    })
    files["metrics.json"] = formats.dumps(out.metrics)
    files["k_histogram.csv"] = histogram_csv(out.metrics["k_anonymity"])
    paths = []
    for name, text in files.items():
        p = d / name
        p.write_text(text)
        paths.append(p)
    return paths
