"""Scenario builders used by the experiment scripts and the test-suite."""

from __future__ import annotations

import math

from .core import ProtocolMode
from .sim import (AdversaryConfig, Infection, MobilityConfig, ReplaySpec, SimConfig, TotemSpec, VenueSpec,
                  substream)


def _log_uniform_int(rng, lo: int, hi: int) -> int:
    return min(hi, max(lo, int(math.exp(rng.uniform(math.log(lo), math.log(hi + 1))))))


def random_scenario(seed: int, mode=ProtocolMode.CENTRALIZED, max_totems: int = 10, max_devices: int = 50,
                    max_slots: int = 200, venues: bool = False, **overrides) -> SimConfig:
    """A random deployment on a grid of totems.

    Sizes are log-uniform up to the given maxima so small and large cases both
    show up. With ``venues`` some zones have no totem, which creates coverage gaps.
    """
    rng = substream(seed, "scenario")
    n_totems = rng.randint(1, max_totems)
    n_devices = _log_uniform_int(rng, 2, max_devices)
    n_slots = _log_uniform_int(rng, 3, max_slots)
    slot_len = rng.choice([60.0, 300.0, 600.0])
    spacing = rng.choice([40.0, 150.0, 600.0])
    side = math.ceil(math.sqrt(n_totems))
    totems = tuple(
        TotemSpec(f"T-{i:04d}", (i % side) * spacing, (i // side) * spacing, rng.choice([8.0, 12.0, 20.0]))
        for i in range(n_totems))
    vs = ()
    if venues:
        vs = tuple(VenueSpec(f"V-{i:04d}", -spacing * (i + 1), -spacing, 15.0) for i in range(rng.randint(1, 3)))
    duration = n_slots * slot_len
    n_inf = rng.randint(1, min(3, n_devices - 1))
    infected = rng.sample(range(n_devices), n_inf)
    infections = tuple(Infection(d, round(rng.uniform(0, duration - 1), 1)) for d in sorted(infected))
    mobility = MobilityConfig(dwell_mean=slot_len * rng.choice([1.0, 2.0, 4.0]), speed=rng.choice([1.4, 5.0]))
    params = dict(seed=seed, duration=duration, totems=totems, device_count=n_devices, mode=ProtocolMode(mode),
                  slot_len=slot_len, epsilon=rng.randint(0, 2), risk_threshold=slot_len * rng.randint(1, 3),
                  venues=vs, mobility=mobility, infections=infections)
    params.update(overrides)
    return SimConfig(**params)


def kanon_scenario(k: int, seed: int, mode=ProtocolMode.CENTRALIZED, slot_len: float = 60.0) -> SimConfig:
    """``k`` devices pinned at one totem for a single slot; one of them is diagnosed.

    The adversary targets device 0 and hears everything.
    """
    rng = substream(seed, "kanon")
    return SimConfig(
        seed=seed, duration=slot_len, slot_len=slot_len, device_count=k, mode=ProtocolMode(mode),
        totems=(TotemSpec("T-0001", 0.0, 0.0, 10.0),),
        mobility=MobilityConfig(transition=[[1.0]], initial_zones=(0,) * k),
        infections=(Infection(rng.randrange(k), round(rng.uniform(0, slot_len - 1), 1)),),
        adversary=AdversaryConfig(targets=(0,)),
        risk_threshold=slot_len)


def replay_scenario(seed: int, fraud_detection: bool, distance: float = 30000.0, n_far: int = 3,
                    n_near: int = 2, slots: int = 6, slot_len: float = 600.0) -> SimConfig:
    """Victim and friends sit at one totem, strangers at another ``distance`` away.

    The adversary relays the victim's beacon to the far totem in every slot,
    then the victim is diagnosed.
    """
    totems = (TotemSpec("T-NEAR", 0.0, 0.0, 10.0), TotemSpec("T-FAR", distance, 0.0, 10.0))
    n = 1 + n_near + n_far
    zones = (0,) * (1 + n_near) + (1,) * n_far
    duration = slots * slot_len
    replays = tuple(ReplaySpec(0, "T-FAR", s * slot_len + 100.0) for s in range(slots))
    return SimConfig(
        seed=seed, duration=duration, slot_len=slot_len, device_count=n, totems=totems,
        mobility=MobilityConfig(transition=[[1.0, 0.0], [0.0, 1.0]], initial_zones=zones),
        infections=(Infection(0, duration - 1.0),),
        adversary=AdversaryConfig(replays=replays),
        fraud_detection=fraud_detection, risk_threshold=900.0)


def highway_scenario(seed: int, n_devices: int = 20, speed: float = 20.0, slot_len: float = 60.0,
                     n_slots: int = 60, fraud_detection: bool = True) -> SimConfig:
    """Fast honest traffic between totems a kilometre apart."""
    rng = substream(seed, "highway")
    totems = tuple(TotemSpec(f"T-{i:04d}", 1000.0 * (i % 4), 1000.0 * (i // 4), 10.0) for i in range(8))
    return SimConfig(
        seed=seed, duration=n_slots * slot_len, slot_len=slot_len, device_count=n_devices, totems=totems,
        mobility=MobilityConfig(dwell_mean=30.0, speed=speed),
        infections=(Infection(rng.randrange(n_devices), n_slots * slot_len / 2),),
        fraud_detection=fraud_detection)
