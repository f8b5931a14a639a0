import math
import random

import pytest
from hypothesis import given, strategies as st

from iotrace.mobility import (MobilityError, Segment, Zone, check_transition, crossing_times, disc_interval,
                              next_position, start, trajectory)
from iotrace.sim import ConfigError, MobilityConfig, SimConfig, TotemSpec

ZONES = [Zone("a", 0.0, 0.0, 5.0, True), Zone("b", 100.0, 0.0, 5.0, True)]


def test_identity_matrix_never_moves():
    rng = random.Random(1)
    st_ = start(ZONES, [[1, 0], [0, 1]], 60.0, 1.4, 1, rng)
    x0 = (st_.x, st_.y)
    for _ in range(200):
        assert next_position(st_, rng) == x0
    assert all(not s.moving for s in st_.segments)


def test_uniform_two_zone_occupancy():
    rng = random.Random(7)
    st_ = start(ZONES, [[0.5, 0.5], [0.5, 0.5]], 10.0, 50.0, 0, rng)
    at_a = 0
    n = 10**4
    for _ in range(n):
        next_position(st_, rng)
        at_a += st_.zone == 0
    assert abs(at_a / n - 0.5) <= 0.05


@pytest.mark.parametrize("matrix", [[[0.5, 0.4], [0.5, 0.5]], [[1.2, -0.2], [0, 1]], [[1, 0]], [[1, 0], [1]]])
def test_malformed_matrix(matrix):
    with pytest.raises(MobilityError):
        check_transition(matrix, 2)


def test_row_tolerance():
    check_transition([[0.5, 0.5 + 1e-10], [0, 1]], 2)
    with pytest.raises(MobilityError):
        check_transition([[0.5, 0.5 + 1e-8], [0, 1]], 2)


@pytest.mark.parametrize("field, value", [("dwell_mean", -5.0), ("dwell_mean", 0.0), ("speed", 0.0)])
def test_bad_mobility_config(field, value):
    with pytest.raises(ConfigError, match=field):
        SimConfig(seed=0, duration=600.0, totems=(TotemSpec("T", 0, 0, 10),), device_count=1,
                  mobility=MobilityConfig(**{field: value}))


def test_trajectory_is_contiguous_and_speed_capped():
    rng = random.Random(3)
    st_ = start(ZONES, [[0.2, 0.8], [0.7, 0.3]], 30.0, 2.0, 0, rng)
    segs = trajectory(st_, rng, 5000.0)
    assert segs[0].t0 == 0.0 and segs[-1].t1 >= 5000.0
    for a, b in zip(segs, segs[1:]):
        assert a.t1 == b.t0 and (a.x1, a.y1) == (b.x0, b.y0)
    for s in segs:
        if s.moving:
            assert math.hypot(s.x1 - s.x0, s.y1 - s.y0) / (s.t1 - s.t0) == pytest.approx(2.0)


coord = st.floats(-50, 50, allow_nan=False)


@given(coord, coord, coord, coord, st.floats(1, 30), st.floats(0.5, 100))
def test_disc_interval_matches_sampling(x0, y0, x1, y1, r, dur):
    seg = Segment(0.0, dur, x0, y0, x1, y1, None)
    iv = disc_interval(seg, 0.0, 0.0, r)
    for i in range(201):
        t = dur * i / 200
        x, y = seg.position(t)
        d = math.hypot(x, y)
        if iv is not None and iv[0] + 1e-6 < t < iv[1] - 1e-6:
            assert d <= r + 1e-6
        elif d < r - 1e-6:
            assert iv is not None and iv[0] - 1e-6 <= t <= iv[1] + 1e-6


def test_crossing_times_inside_segment():
    seg = Segment(0.0, 100.0, -50.0, 0.0, 50.0, 0.0, None)
    assert sorted(crossing_times(seg, [(0.0, 0.0, 10.0)])) == pytest.approx([40.0, 60.0])
    assert crossing_times(Segment(0, 10, 0, 0, 0, 0, 1), [(0.0, 0.0, 10.0)]) == []
